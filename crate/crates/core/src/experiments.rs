//! Experiment drivers: convergence traces, λ and ξ sweeps and the
//! per-iteration cost benchmark, each written as a CSV file.
//!
//! Trial `t` of a scenario always draws its instance from
//! `derive_stream(master_seed, scenario.tag(), t)`, whatever λ or ξ is being
//! run, so both algorithms see the same instance and sweeps share instances
//! across grid points. Trials run on the rayon pool and are reduced in trial
//! order, which keeps every deterministic CSV byte-identical between runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::adcd::adcd_solve;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, AggregateRow, TrialOutcome};
use crate::pg::pg_solve;
use crate::problem::{generate_instance, Ensemble, ProblemInstance, ScenarioConfig};
use crate::rng::derive_stream;
use crate::trace::SolveResult;

pub const LAMBDA_MIN: f64 = 5e-4;
pub const LAMBDA_MAX: f64 = 1.0;
pub const DEFAULT_LAMBDA: f64 = 0.02;
pub const DEFAULT_XI: f64 = 0.01;
pub const DEFAULT_TRIALS: usize = 100;
pub const LAMBDA_GRID_POINTS: usize = 25;
pub const XI_GRID_POINTS: usize = 13;

pub const TRACE_HEADER: &str = "scenario,algorithm,iteration,mean_sq_error,mean_cost";
pub const LAMBDA_SWEEP_HEADER: &str =
    "scenario,algorithm,lambda,iterations,mean_sq_error,mean_fn,mean_fp,mean_fn_rate,mean_fp_rate";
pub const XI_SWEEP_HEADER: &str = "scenario,algorithm,xi,mean_sq_error";
pub const BENCH_HEADER: &str = "scenario,lambda,algo,mean_iter_ns,mean_iter_flops,ratio_vs_pg";

/// Which iteration schedule applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    S1,
    S2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    S1,
    S2,
    /// Custom dimensions; uses the S1 iteration schedule.
    Custom {
        n: usize,
        m: usize,
        k: usize,
        ensemble: Ensemble,
    },
}

impl Scenario {
    pub fn id(&self) -> &'static str {
        match self {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
            Scenario::Custom { .. } => "custom",
        }
    }

    /// Stream-derivation tag.
    pub fn tag(&self) -> u64 {
        match self {
            Scenario::S1 => 1,
            Scenario::S2 => 2,
            Scenario::Custom { .. } => 0,
        }
    }

    pub fn schedule_kind(&self) -> ScheduleKind {
        match self {
            Scenario::S2 => ScheduleKind::S2,
            _ => ScheduleKind::S1,
        }
    }

    pub fn config(&self, xi: f64, seed: u64) -> ScenarioConfig {
        match *self {
            Scenario::S1 => ScenarioConfig::scenario1(xi, seed),
            Scenario::S2 => ScenarioConfig::scenario2(xi, seed),
            Scenario::Custom { n, m, k, ensemble } => ScenarioConfig {
                n,
                m,
                k,
                ensemble,
                xi,
                seed,
            },
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// `s1`, `s2`, or `custom:N:M:K:ENSEMBLE` (spaces also separate fields).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s
            .split(|c: char| c == ':' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        match parts.as_slice() {
            ["s1"] | ["S1"] => Ok(Scenario::S1),
            ["s2"] | ["S2"] => Ok(Scenario::S2),
            ["custom", n, m, k, ens] => {
                let num = |v: &str, name: &str| {
                    v.parse::<usize>().map_err(|_| {
                        Error::InvalidScenario(format!("{name} must be a positive integer, got `{v}`"))
                    })
                };
                let scenario = Scenario::Custom {
                    n: num(n, "N")?,
                    m: num(m, "M")?,
                    k: num(k, "K")?,
                    ensemble: ens.parse()?,
                };
                scenario.config(0.0, 0).validate()?;
                Ok(scenario)
            }
            _ => Err(Error::InvalidScenario(format!(
                "expected `s1`, `s2` or `custom N M K ENSEMBLE`, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Pg,
    Adcd,
}

impl Algorithm {
    pub const BOTH: [Algorithm; 2] = [Algorithm::Pg, Algorithm::Adcd];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Pg => "pg",
            Algorithm::Adcd => "adcd",
        }
    }

    pub fn solve(
        self,
        instance: &ProblemInstance,
        lambda: f64,
        iterations: usize,
        with_truth: bool,
    ) -> Result<SolveResult> {
        let truth = with_truth.then_some(instance.x_true.as_slice());
        match self {
            Algorithm::Pg => pg_solve(&instance.a, &instance.b, lambda, iterations, truth),
            Algorithm::Adcd => adcd_solve(&instance.a, &instance.b, lambda, iterations, truth),
        }
    }
}

/// Log-linear iteration budget: 2800 → 40 (S1) or 3500 → 50 (S2) as λ goes
/// from 5e-4 to 1. λ outside that range is clamped.
pub fn iteration_schedule(lambda: f64, kind: ScheduleKind) -> usize {
    let (hi_iters, lo_iters) = match kind {
        ScheduleKind::S1 => (2800.0f64, 40.0f64),
        ScheduleKind::S2 => (3500.0f64, 50.0f64),
    };
    let lambda = lambda.clamp(LAMBDA_MIN, LAMBDA_MAX);
    let t = (lambda.ln() - LAMBDA_MIN.ln()) / (LAMBDA_MAX.ln() - LAMBDA_MIN.ln());
    (hi_iters.ln() + t * (lo_iters.ln() - hi_iters.ln())).exp().round() as usize
}

/// `points` log-spaced values from `lo` to `hi`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i == 0 {
                    lo
                } else if i == points - 1 {
                    hi
                } else {
                    let t = i as f64 / (points - 1) as f64;
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                }
            })
            .collect(),
    }
}

pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(LAMBDA_MIN, LAMBDA_MAX, LAMBDA_GRID_POINTS)
}

pub fn default_xi_grid() -> Vec<f64> {
    log_grid(1e-4, 1e-1, XI_GRID_POINTS)
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub lambda_grid: Vec<f64>,
    pub xi_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// λ for the trace experiment.
    pub lambda: f64,
    /// ξ for the trace experiment and the λ sweep.
    pub xi: f64,
    /// Fixed iteration count instead of the schedule.
    pub iterations: Option<usize>,
    pub algorithms: Vec<Algorithm>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            scenario,
            lambda_grid: default_lambda_grid(),
            xi_grid: default_xi_grid(),
            trials: DEFAULT_TRIALS,
            master_seed: 0,
            out_dir: out_dir.into(),
            lambda: DEFAULT_LAMBDA,
            xi: DEFAULT_XI,
            iterations: None,
            algorithms: Algorithm::BOTH.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sorted = |g: &[f64]| g.windows(2).all(|w| w[0] <= w[1]);
        if self.lambda_grid.is_empty() || !sorted(&self.lambda_grid) {
            return Err(Error::InvalidArgument(
                "lambda grid must be non-empty and ascending".into(),
            ));
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("lambda values must be positive".into()));
        }
        if self.xi_grid.is_empty() || !sorted(&self.xi_grid) {
            return Err(Error::InvalidArgument(
                "xi grid must be non-empty and ascending".into(),
            ));
        }
        if self.xi_grid.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("xi values must be non-negative".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.iterations == Some(0) {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("no algorithm selected".into()));
        }
        self.scenario.config(self.xi, self.master_seed).validate()
    }

    pub fn iterations_for(&self, lambda: f64) -> usize {
        self.iterations
            .unwrap_or_else(|| iteration_schedule(lambda, self.scenario.schedule_kind()))
    }

    /// Instance of trial `trial` at perturbation level `xi`.
    pub fn instance(&self, xi: f64, trial: usize) -> Result<ProblemInstance> {
        instance_for(&self.scenario, xi, self.master_seed, trial)
    }
}

pub fn instance_for(
    scenario: &Scenario,
    xi: f64,
    master_seed: u64,
    trial: usize,
) -> Result<ProblemInstance> {
    let cfg = scenario.config(xi, master_seed);
    let mut rng = derive_stream(master_seed, scenario.tag(), trial as u64);
    generate_instance(&cfg, &mut rng)
}

/// Runs every selected algorithm on every trial's instance, in parallel over
/// trials; results come back in trial order, one vector per algorithm.
fn paired_trials<T: Send>(
    cfg: &ExperimentConfig,
    xi: f64,
    run: impl Fn(Algorithm, &ProblemInstance) -> Result<T> + Sync,
) -> Result<Vec<Vec<T>>> {
    let per_trial: Vec<Vec<T>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let instance = cfg.instance(xi, t)?;
            cfg.algorithms.iter().map(|&alg| run(alg, &instance)).collect()
        })
        .collect::<Result<_>>()?;
    let mut per_algo: Vec<Vec<T>> = cfg.algorithms.iter().map(|_| Vec::new()).collect();
    for trial in per_trial {
        for (slot, value) in per_algo.iter_mut().zip(trial) {
            slot.push(value);
        }
    }
    Ok(per_algo)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub scenario: &'static str,
    pub algorithm: &'static str,
    pub iteration: usize,
    pub mean_sq_error: f64,
    pub mean_cost: f64,
}

/// Per-iteration squared error and cost, averaged over trials.
pub fn trace_rows(cfg: &ExperimentConfig, lambda: f64, xi: f64) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let iterations = cfg.iterations_for(lambda);
    let results = paired_trials(cfg, xi, |alg, inst| alg.solve(inst, lambda, iterations, true))?;
    let mut rows = Vec::new();
    for (alg, runs) in cfg.algorithms.iter().zip(&results) {
        let len = runs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
        let count = runs.len() as f64;
        for i in 0..len {
            let err: f64 = runs.iter().map(|r| r.trace[i].sq_error.unwrap_or(f64::NAN)).sum();
            let cost: f64 = runs.iter().map(|r| r.trace[i].cost).sum();
            rows.push(TraceRow {
                scenario: cfg.scenario.id(),
                algorithm: alg.id(),
                iteration: runs[0].trace[i].iteration,
                mean_sq_error: err / count,
                mean_cost: cost / count,
            });
        }
    }
    Ok(rows)
}

pub fn run_trace(cfg: &ExperimentConfig, lambda: f64, xi: f64) -> Result<PathBuf> {
    let rows = trace_rows(cfg, lambda, xi)?;
    let mut csv = String::from(TRACE_HEADER);
    csv.push('\n');
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.scenario, r.algorithm, r.iteration, r.mean_sq_error, r.mean_cost
        )
        .unwrap();
    }
    write_csv(&cfg.out_dir, "trace.csv", &csv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub iterations: usize,
    pub stats: AggregateRow,
}

/// Converged error and support errors per λ at perturbation level `cfg.xi`.
pub fn lambda_sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &lambda in &cfg.lambda_grid {
        let iterations = cfg.iterations_for(lambda);
        let outcomes = paired_trials(cfg, cfg.xi, |alg, inst| {
            let r = alg.solve(inst, lambda, iterations, false)?;
            TrialOutcome::evaluate(&r.x, &inst.x_true)
        })?;
        for (alg, outs) in cfg.algorithms.iter().zip(&outcomes) {
            rows.push(SweepRow {
                iterations,
                stats: aggregate(cfg.scenario.id(), alg.id(), lambda, outs)?,
            });
        }
    }
    Ok(rows)
}

pub fn run_lambda_sweep(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let rows = lambda_sweep_rows(cfg)?;
    let mut csv = String::from(LAMBDA_SWEEP_HEADER);
    csv.push('\n');
    for SweepRow { iterations, stats: s } in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            s.scenario,
            s.algorithm,
            s.param,
            iterations,
            s.mean_sq_error,
            s.mean_fn,
            s.mean_fp,
            s.mean_fn_rate,
            s.mean_fp_rate
        )
        .unwrap();
    }
    write_csv(&cfg.out_dir, "lambda_sweep.csv", &csv)
}

/// Converged error per ξ at regularization `cfg.lambda`.
pub fn xi_sweep_rows(cfg: &ExperimentConfig) -> Result<Vec<AggregateRow>> {
    cfg.validate()?;
    let lambda = cfg.lambda;
    let iterations = cfg.iterations_for(lambda);
    let mut rows = Vec::new();
    for &xi in &cfg.xi_grid {
        let outcomes = paired_trials(cfg, xi, |alg, inst| {
            let r = alg.solve(inst, lambda, iterations, false)?;
            TrialOutcome::evaluate(&r.x, &inst.x_true)
        })?;
        for (alg, outs) in cfg.algorithms.iter().zip(&outcomes) {
            rows.push(aggregate(cfg.scenario.id(), alg.id(), xi, outs)?);
        }
    }
    Ok(rows)
}

pub fn run_xi_sweep(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let rows = xi_sweep_rows(cfg)?;
    let mut csv = String::from(XI_SWEEP_HEADER);
    csv.push('\n');
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{}",
            r.scenario, r.algorithm, r.param, r.mean_sq_error
        )
        .unwrap();
    }
    write_csv(&cfg.out_dir, "xi_sweep.csv", &csv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub scenario: &'static str,
    pub lambda: f64,
    pub algorithm: Algorithm,
    pub mean_iter_ns: f64,
    pub mean_iter_flops: f64,
    /// Wall-clock per iteration relative to the proximal-gradient solver.
    pub ratio_vs_pg: f64,
}

/// Per-iteration wall-clock and flop cost of each algorithm for every
/// scenario in `scenarios` and every λ in `cfg.lambda_grid`.
///
/// Trials run sequentially so timings do not compete for cores. Instance
/// generation is outside the timed region; the proximal-gradient solver's
/// one-time `AᵀA`/`Aᵀb` precomputation is inside it and therefore amortized
/// over the iteration count.
pub fn bench_rows(cfg: &ExperimentConfig, scenarios: &[Scenario]) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for scenario in scenarios {
        let mut scfg = cfg.clone();
        scfg.scenario = scenario.clone();
        scfg.validate()?;
        for &lambda in &cfg.lambda_grid {
            let iterations = scfg.iterations_for(lambda);
            let algs = &cfg.algorithms;
            let mut ns = vec![0u128; algs.len()];
            let mut flops = vec![0u64; algs.len()];
            let mut iters = vec![0usize; algs.len()];
            for t in 0..cfg.trials {
                let instance = scfg.instance(cfg.xi, t)?;
                for (k, alg) in algs.iter().enumerate() {
                    let start = Instant::now();
                    let result = alg.solve(&instance, lambda, iterations, false)?;
                    ns[k] += start.elapsed().as_nanos();
                    flops[k] += result.total_flops();
                    iters[k] += result.iterations();
                }
            }
            let per_iter_ns: Vec<f64> = ns
                .iter()
                .zip(&iters)
                .map(|(&n, &i)| n as f64 / i as f64)
                .collect();
            let pg_ns = algs
                .iter()
                .position(|a| *a == Algorithm::Pg)
                .map(|k| per_iter_ns[k]);
            for (k, &alg) in algs.iter().enumerate() {
                rows.push(BenchRow {
                    scenario: scenario.id(),
                    lambda,
                    algorithm: alg,
                    mean_iter_ns: per_iter_ns[k],
                    mean_iter_flops: flops[k] as f64 / iters[k] as f64,
                    ratio_vs_pg: pg_ns.map_or(f64::NAN, |p| per_iter_ns[k] / p),
                });
            }
        }
    }
    Ok(rows)
}

pub fn run_bench(cfg: &ExperimentConfig, scenarios: &[Scenario]) -> Result<PathBuf> {
    let rows = bench_rows(cfg, scenarios)?;
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{:.1},{},{:.4}",
            r.scenario,
            r.lambda,
            r.algorithm.id(),
            r.mean_iter_ns,
            r.mean_iter_flops,
            r.ratio_vs_pg
        )
        .unwrap();
    }
    write_csv(&cfg.out_dir, "bench.csv", &csv)
}

fn write_csv(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
