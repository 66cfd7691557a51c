//! Synthetic perturbed-compressive-sensing instances.
//!
//! A clean system `b_clean = A_clean x_true` is corrupted on both sides,
//! `A = A_clean - A_noise` and `b = b_clean - b_noise`, with i.i.d. Gaussian
//! noise of variance `xi / M`. Only `(A, b)` is handed to the solvers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, Matrix};
use crate::rng::{mix64, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ensemble {
    Gaussian,
    Rademacher,
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Ensemble::Gaussian),
            "rademacher" | "bernoulli" => Ok(Ensemble::Rademacher),
            other => Err(Error::InvalidScenario(format!("unknown ensemble `{other}`"))),
        }
    }
}

impl std::fmt::Display for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ensemble::Gaussian => "gaussian",
            Ensemble::Rademacher => "rademacher",
        })
    }
}

/// Dimensions, sensing ensemble and perturbation level of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Number of unknowns (columns).
    pub n: usize,
    /// Number of measurements (rows).
    pub m: usize,
    /// Nonzeros in the true signal.
    pub k: usize,
    pub ensemble: Ensemble,
    /// Perturbation-variance parameter; noise entries have variance `xi / m`.
    pub xi: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// N = 40, M = 20, K = 5, Gaussian sensing matrix.
    pub fn scenario1(xi: f64, seed: u64) -> Self {
        ScenarioConfig {
            n: 40,
            m: 20,
            k: 5,
            ensemble: Ensemble::Gaussian,
            xi,
            seed,
        }
    }

    /// N = 200, M = 80, K = 20, Rademacher sensing matrix.
    pub fn scenario2(xi: f64, seed: u64) -> Self {
        ScenarioConfig {
            n: 200,
            m: 80,
            k: 20,
            ensemble: Ensemble::Rademacher,
            xi,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 1 && self.k < self.m && self.m < self.n) {
            return Err(Error::InvalidScenario(format!(
                "need 1 <= K < M < N, got N={} M={} K={}",
                self.n, self.m, self.k
            )));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "xi must be finite and non-negative, got {}",
                self.xi
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub a_clean: Matrix,
    pub x_true: Vec<f64>,
    pub b_clean: Vec<f64>,
    pub a_noise: Matrix,
    pub b_noise: Vec<f64>,
    /// Observed matrix, `a_clean - a_noise`.
    pub a: Matrix,
    /// Observed measurements, `b_clean - b_noise`.
    pub b: Vec<f64>,
}

/// i.i.d. zero-mean Gaussian entries with the given variance.
pub fn gaussian_matrix(m: usize, n: usize, variance: f64, rng: &mut RngStream) -> Matrix {
    let sd = variance.sqrt();
    Matrix::from_fn(m, n, |_, _| scaled_normal(sd, rng))
}

fn gaussian_vector(len: usize, variance: f64, rng: &mut RngStream) -> Vec<f64> {
    let sd = variance.sqrt();
    (0..len).map(|_| scaled_normal(sd, rng)).collect()
}

// Always consumes a draw so streams stay aligned across noise levels.
#[inline]
fn scaled_normal(sd: f64, rng: &mut RngStream) -> f64 {
    let z = rng.standard_normal();
    if sd == 0.0 {
        0.0
    } else {
        sd * z
    }
}

/// Entries `±1/sqrt(m)` with fair signs.
pub fn rademacher_matrix(m: usize, n: usize, rng: &mut RngStream) -> Matrix {
    let scale = 1.0 / (m as f64).sqrt();
    Matrix::from_fn(m, n, |_, _| if rng.coin() { scale } else { -scale })
}

/// A unit-norm vector with exactly `k` nonzeros on a uniformly random support.
pub fn sparse_signal(n: usize, k: usize, rng: &mut RngStream) -> Vec<f64> {
    assert!(k >= 1 && k <= n, "sparse_signal needs 1 <= k <= n");
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher–Yates
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut x = vec![0.0; n];
    for &i in &idx[..k] {
        let mut v = rng.standard_normal();
        while v == 0.0 {
            v = rng.standard_normal();
        }
        x[i] = v;
    }
    let norm = norm_sq(&x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    x
}

pub fn generate_instance(cfg: &ScenarioConfig, rng: &mut RngStream) -> Result<ProblemInstance> {
    cfg.validate()?;
    let (m, n) = (cfg.m, cfg.n);
    let a_clean = match cfg.ensemble {
        Ensemble::Gaussian => gaussian_matrix(m, n, 1.0 / m as f64, rng),
        Ensemble::Rademacher => rademacher_matrix(m, n, rng),
    };
    let x_true = sparse_signal(n, cfg.k, rng);
    let noise_var = cfg.xi / m as f64;
    let a_noise = gaussian_matrix(m, n, noise_var, rng);
    let b_noise = gaussian_vector(m, noise_var, rng);
    assemble(a_clean, x_true, a_noise, b_noise)
}

fn assemble(
    a_clean: Matrix,
    x_true: Vec<f64>,
    a_noise: Matrix,
    b_noise: Vec<f64>,
) -> Result<ProblemInstance> {
    let b_clean = a_clean.matvec(&x_true)?;
    let a = a_clean.sub(&a_noise)?;
    crate::error::check_len("instance noise vector", b_clean.len(), b_noise.len())?;
    let b = b_clean.iter().zip(&b_noise).map(|(c, e)| c - e).collect();
    Ok(ProblemInstance {
        a_clean,
        x_true,
        b_clean,
        a_noise,
        b_noise,
        a,
        b,
    })
}

impl ProblemInstance {
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn sparsity(&self) -> usize {
        self.x_true.iter().filter(|v| **v != 0.0).count()
    }

    /// 64-bit digest of every stored number's bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h = mix64((self.m() as u64) << 32 | self.n() as u64);
        let fields: [&[f64]; 7] = [
            self.a_clean.as_slice(),
            &self.x_true,
            &self.b_clean,
            self.a_noise.as_slice(),
            &self.b_noise,
            self.a.as_slice(),
            &self.b,
        ];
        for field in fields {
            for v in field {
                h = mix64(h ^ v.to_bits());
            }
        }
        h
    }

    /// Text dump: header `PCS1 M N K xi seed`, then the labelled blocks
    /// `A_o`, `x_o`, `E_o`, `e_o`, `b`, one matrix row per line, values with
    /// 17 significant digits. Vectors occupy a single line.
    pub fn to_text(&self, xi: f64, seed: u64) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "PCS1 {} {} {} {} {}",
            self.m(),
            self.n(),
            self.sparsity(),
            xi,
            seed
        )
        .unwrap();
        write_matrix_block(&mut out, "A_o", &self.a_clean);
        write_vector_block(&mut out, "x_o", &self.x_true);
        write_matrix_block(&mut out, "E_o", &self.a_noise);
        write_vector_block(&mut out, "e_o", &self.b_noise);
        write_vector_block(&mut out, "b", &self.b);
        out
    }

    pub fn save(&self, path: &Path, xi: f64, seed: u64) -> Result<()> {
        fs::write(path, self.to_text(xi, seed)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<LoadedInstance> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Parses a dump. `b_clean` is recomputed as `A_o x_o` and `A` as
    /// `A_o - E_o`; the stored `b` is kept verbatim.
    pub fn from_text(text: &str) -> Result<LoadedInstance> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| fmt_err(1, "empty file"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "PCS1" {
            return Err(fmt_err(hl + 1, "expected header `PCS1 M N K xi seed`"));
        }
        let m: usize = parse_field(hl, parts[1], "M")?;
        let n: usize = parse_field(hl, parts[2], "N")?;
        let k: usize = parse_field(hl, parts[3], "K")?;
        let xi: f64 = parse_field(hl, parts[4], "xi")?;
        let seed: u64 = parse_field(hl, parts[5], "seed")?;

        let mut read_rows = |label: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
            match lines.next() {
                Some((_, l)) if l.trim() == label => {}
                Some((i, l)) => {
                    return Err(fmt_err(
                        i + 1,
                        &format!("expected block `{label}`, found `{}`", l.trim()),
                    ))
                }
                None => return Err(fmt_err(0, &format!("missing block `{label}`"))),
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (i, l) = lines
                    .next()
                    .ok_or_else(|| fmt_err(0, &format!("block `{label}` is truncated")))?;
                let before = data.len();
                for tok in l.split_whitespace() {
                    data.push(tok.parse::<f64>().map_err(|_| {
                        fmt_err(i + 1, &format!("bad number `{tok}` in `{label}`"))
                    })?);
                }
                if data.len() - before != cols {
                    return Err(fmt_err(
                        i + 1,
                        &format!("expected {cols} values in `{label}`, got {}", data.len() - before),
                    ));
                }
            }
            Ok(data)
        };

        let a_clean = Matrix::from_vec(m, n, read_rows("A_o", m, n)?)?;
        let x_true = read_rows("x_o", 1, n)?;
        let a_noise = Matrix::from_vec(m, n, read_rows("E_o", m, n)?)?;
        let b_noise = read_rows("e_o", 1, m)?;
        let b = read_rows("b", 1, m)?;

        let mut instance = assemble(a_clean, x_true, a_noise, b_noise)?;
        instance.b = b;
        if instance.sparsity() != k {
            return Err(fmt_err(
                hl + 1,
                &format!("header says K={k} but x_o has {} nonzeros", instance.sparsity()),
            ));
        }
        Ok(LoadedInstance { instance, xi, seed })
    }
}

/// An instance read back from disk together with its header metadata.
#[derive(Clone, Debug)]
pub struct LoadedInstance {
    pub instance: ProblemInstance,
    pub xi: f64,
    pub seed: u64,
}

fn fmt_err(line: usize, reason: &str) -> Error {
    Error::InstanceFormat {
        line,
        reason: reason.to_string(),
    }
}

fn parse_field<T: FromStr>(line: usize, tok: &str, name: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| fmt_err(line + 1, &format!("bad header field {name} = `{tok}`")))
}

fn write_values(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:.16e}").unwrap();
    }
    out.push('\n');
}

fn write_matrix_block(out: &mut String, label: &str, m: &Matrix) {
    out.push_str(label);
    out.push('\n');
    for i in 0..m.rows() {
        write_values(out, m.row(i));
    }
}

fn write_vector_block(out: &mut String, label: &str, v: &[f64]) {
    out.push_str(label);
    out.push('\n');
    write_values(out, v);
}
