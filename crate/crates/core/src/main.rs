use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = sparse_tls::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
