//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid arguments (usage printed on
//! standard error), 1 for runtime failures. Flags may also come from a
//! `--config FILE` of `key = value` lines named like the flags; anything on
//! the command line overrides the file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::experiments::{
    instance_for, run_bench, run_lambda_sweep, run_trace, run_xi_sweep, Algorithm,
    ExperimentConfig, Scenario, DEFAULT_XI,
};
use crate::metrics::TrialOutcome;
use crate::problem::ProblemInstance;

#[derive(Parser, Debug)]
#[command(
    name = "sparse-tls",
    version,
    about = "Sparse total least-squares reconstruction for perturbed compressive sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one synthetic instance to <out>/instance.txt
    Generate(Flags),
    /// Solve one instance and print the final error and cost
    Solve(Flags),
    /// Per-iteration error and cost averaged over trials (trace.csv)
    Trace(Flags),
    /// Converged error and support errors across λ (lambda_sweep.csv)
    SweepLambda(Flags),
    /// Converged error across ξ (xi_sweep.csv)
    SweepXi(Flags),
    /// Per-iteration wall-clock and flop comparison (bench.csv)
    Bench(Flags),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Pg,
    Adcd,
    Both,
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    /// s1, s2, or `custom N M K ENSEMBLE`
    #[arg(long, num_args = 1..=5, value_name = "SCENARIO")]
    scenario: Option<Vec<String>>,
    /// Regularization weight
    #[arg(long)]
    lambda: Option<f64>,
    /// Perturbation-variance parameter
    #[arg(long)]
    xi: Option<f64>,
    /// Independent trials to average over
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed iteration count (overrides the λ-dependent schedule)
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated λ values for sweep-lambda and bench
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Comma-separated ξ values for sweep-xi
    #[arg(long, value_delimiter = ',')]
    xi_grid: Option<Vec<f64>>,
    /// Trial index for generate and solve
    #[arg(long)]
    trial: Option<usize>,
    /// Instance file to solve instead of generating one
    #[arg(long, value_name = "FILE")]
    instance: Option<PathBuf>,
    /// File of `key = value` lines mirroring these flags
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

impl Flags {
    /// Fills every flag not given on the command line from `file`.
    fn fill_from(&mut self, file: &Flags) {
        macro_rules! fill {
            ($($field:ident),*) => {
                $(if self.$field.is_none() {
                    self.$field = file.$field.clone();
                })*
            };
        }
        fill!(scenario, lambda, xi, trials, seed, iters, algo, out, lambda_grid, xi_grid, trial, instance);
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Solve(_) => "solve",
            Command::Trace(_) => "trace",
            Command::SweepLambda(_) => "sweep-lambda",
            Command::SweepXi(_) => "sweep-xi",
            Command::Bench(_) => "bench",
        }
    }

    fn flags_mut(&mut self) -> &mut Flags {
        match self {
            Command::Generate(f)
            | Command::Solve(f)
            | Command::Trace(f)
            | Command::SweepLambda(f)
            | Command::SweepXi(f)
            | Command::Bench(f) => f,
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Generate(f)
            | Command::Solve(f)
            | Command::Trace(f)
            | Command::SweepLambda(f)
            | Command::SweepXi(f)
            | Command::Bench(f) => f,
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::InvalidScenario(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other),
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
            } else {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
        Err(ParseFailure::Config(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return 2;
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n");
            let mut cmd = Cli::command();
            cmd.build();
            let usage = match cmd.find_subcommand_mut(cli.command.name()) {
                Some(sub) => sub.render_usage(),
                None => cmd.render_usage(),
            };
            let _ = write!(err, "{usage}");
            let _ = writeln!(err);
            2
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Config(String),
}

fn parse(argv: &[OsString]) -> Result<Cli, ParseFailure> {
    let mut cli = Cli::try_parse_from(argv).map_err(ParseFailure::Clap)?;
    let Some(path) = cli.command.flags().config.clone() else {
        return Ok(cli);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| ParseFailure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut file_argv = argv[..2].to_vec();
    file_argv.extend(config_tokens(&text).map_err(ParseFailure::Config)?);
    let from_file = Cli::try_parse_from(file_argv).map_err(ParseFailure::Clap)?;
    cli.command.flags_mut().fill_from(from_file.command.flags());
    Ok(cli)
}

/// Turns `key = value` lines into `--key value...` tokens. Blank lines and
/// `#` comments are skipped; underscores in keys become dashes.
fn config_tokens(text: &str) -> Result<Vec<OsString>, String> {
    let mut tokens = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", no + 1))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(format!("config line {}: nested config files are not supported", no + 1));
        }
        tokens.push(OsString::from(format!("--{key}")));
        tokens.extend(value.split_whitespace().map(OsString::from));
    }
    Ok(tokens)
}

fn scenario_of(flags: &Flags) -> Result<Scenario, Error> {
    match &flags.scenario {
        None => Ok(Scenario::S1),
        Some(parts) => parts.join(" ").parse(),
    }
}

fn algorithms_of(flags: &Flags) -> Vec<Algorithm> {
    match flags.algo.unwrap_or(AlgoArg::Both) {
        AlgoArg::Pg => vec![Algorithm::Pg],
        AlgoArg::Adcd => vec![Algorithm::Adcd],
        AlgoArg::Both => Algorithm::BOTH.to_vec(),
    }
}

fn experiment_config(flags: &Flags) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::new(
        scenario_of(flags)?,
        flags.out.clone().unwrap_or_else(|| PathBuf::from("results")),
    );
    if let Some(t) = flags.trials {
        cfg.trials = t;
    }
    if let Some(s) = flags.seed {
        cfg.master_seed = s;
    }
    if let Some(l) = flags.lambda {
        cfg.lambda = l;
    }
    if let Some(x) = flags.xi {
        cfg.xi = x;
    }
    cfg.iterations = flags.iters;
    cfg.algorithms = algorithms_of(flags);
    if let Some(g) = &flags.lambda_grid {
        cfg.lambda_grid = g.clone();
    } else if let Some(l) = flags.lambda {
        cfg.lambda_grid = vec![l];
    }
    if let Some(g) = &flags.xi_grid {
        cfg.xi_grid = g.clone();
    } else if let Some(x) = flags.xi {
        cfg.xi_grid = vec![x];
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "--lambda must be positive, got {}",
            cfg.lambda
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: &Command, out: &mut dyn Write) -> Result<(), Failure> {
    let flags = command.flags();
    let cfg = experiment_config(flags)?;
    let report = |out: &mut dyn Write, path: PathBuf| {
        let _ = writeln!(out, "wrote {}", path.display());
    };
    match command {
        Command::Generate(_) => {
            let xi = flags.xi.unwrap_or(DEFAULT_XI);
            let trial = flags.trial.unwrap_or(0);
            let instance = instance_for(&cfg.scenario, xi, cfg.master_seed, trial)?;
            std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
            let path = cfg.out_dir.join("instance.txt");
            instance.save(&path, xi, cfg.master_seed)?;
            report(out, path);
        }
        Command::Solve(_) => {
            let Some(lambda) = flags.lambda else {
                return Err(Failure::Usage("solve requires --lambda".into()));
            };
            let instance = match &flags.instance {
                Some(path) => ProblemInstance::load(path)?.instance,
                None => instance_for(
                    &cfg.scenario,
                    flags.xi.unwrap_or(DEFAULT_XI),
                    cfg.master_seed,
                    flags.trial.unwrap_or(0),
                )?,
            };
            let iterations = cfg.iterations_for(lambda);
            for alg in &cfg.algorithms {
                let result = alg.solve(&instance, lambda, iterations, false)?;
                let score = TrialOutcome::evaluate(&result.x, &instance.x_true)?;
                let _ = writeln!(
                    out,
                    "algo={} iterations={} sq_error={} cost={} false_negatives={} false_positives={}",
                    alg.id(),
                    result.iterations(),
                    score.sq_error,
                    result.final_cost(),
                    score.support.false_negatives,
                    score.support.false_positives,
                );
            }
        }
        Command::Trace(_) => report(out, run_trace(&cfg, cfg.lambda, cfg.xi)?),
        Command::SweepLambda(_) => report(out, run_lambda_sweep(&cfg)?),
        Command::SweepXi(_) => report(out, run_xi_sweep(&cfg)?),
        Command::Bench(_) => {
            let scenarios = match flags.scenario {
                Some(_) => vec![cfg.scenario.clone()],
                None => vec![Scenario::S1, Scenario::S2],
            };
            report(out, run_bench(&cfg, &scenarios)?);
        }
    }
    Ok(())
}
