//! Alternating-direction coordinate descent (AD-CD) baseline.
//!
//! Minimizes `‖(A + E)x − b‖² + ‖E‖²_F + λ‖x‖₁` by alternating a
//! Gauss–Seidel soft-threshold sweep over the coordinates of `x` (with `E`
//! held fixed) and the closed-form rank-1 update
//! `E = (b − Ax)xᵀ / (‖x‖² + 1)` (with `x` held fixed). `E` is kept as a
//! dense M×N matrix and the partial residual of each coordinate is rebuilt
//! from scratch, so a sweep costs between `O(NM·nnz)` and `O(N²M)`.

use crate::error::{check_len, Error, Result};
use crate::kernel::{composite, soft_threshold, FlopCounter};
use crate::linalg::{dot, norm_l1, norm_sq, support, Matrix};
use crate::metrics::squared_error;
use crate::trace::{IterRecord, SolveResult};

#[derive(Clone, Debug, PartialEq)]
pub struct AdcdState {
    pub x: Vec<f64>,
    /// Current estimate of the matrix perturbation.
    pub e: Matrix,
    /// Completed outer iterations.
    pub n: usize,
    pub flops: FlopCounter,
}

pub fn adcd_init(m: usize, n: usize) -> AdcdState {
    AdcdState {
        x: vec![0.0; n],
        e: Matrix::zeros(m, n),
        n: 0,
        flops: FlopCounter::new(),
    }
}

/// Column `j` of `A + E`.
fn corrected_column(a: &Matrix, e: &Matrix, j: usize) -> Vec<f64> {
    (0..a.rows()).map(|i| a.get(i, j) + e.get(i, j)).collect()
}

/// Updates coordinate `i` of `state.x` to the minimizer of
/// `‖r_i − a_i t‖² + λ|t|`, where `a_i` is column `i` of `A + E` and `r_i`
/// is `b` minus the contribution of every other nonzero coordinate.
/// Returns the new value.
pub fn adcd_coordinate_update(
    state: &mut AdcdState,
    a: &Matrix,
    b: &[f64],
    lambda: f64,
    i: usize,
) -> Result<f64> {
    let (m, n) = (a.rows(), a.cols());
    check_len("adcd_coordinate_update: b", m, b.len())?;
    check_len("adcd_coordinate_update: x", n, state.x.len())?;
    if i >= n {
        return Err(Error::InvalidArgument(format!(
            "coordinate {i} out of range for {n} columns"
        )));
    }

    let col_i = corrected_column(a, &state.e, i);
    let col_sq = norm_sq(&col_i);
    state.flops.add(2 * m as u64);

    let mut partial = b.to_vec();
    for (j, &xj) in state.x.iter().enumerate() {
        if j == i || xj == 0.0 {
            continue;
        }
        for (k, p) in partial.iter_mut().enumerate() {
            *p -= (a.get(k, j) + state.e.get(k, j)) * xj;
        }
        state.flops.add(2 * m as u64);
    }

    let value = if col_sq == 0.0 {
        0.0
    } else {
        let rho = dot(&partial, &col_i);
        state.flops.add(m as u64 + 1);
        soft_threshold(rho, lambda / 2.0) / col_sq
    };
    state.x[i] = value;
    Ok(value)
}

/// `E = (b − Ax)xᵀ / (‖x‖² + 1)`, the minimizer over `E` for fixed `x`.
pub fn adcd_perturbation_update(state: &mut AdcdState, a: &Matrix, b: &[f64]) {
    let (m, n) = (a.rows(), a.cols());
    let sup = support(&state.x);
    let ax = a.matvec_support(&state.x, &sup);
    let scale = 1.0 / (norm_sq(&state.x) + 1.0);
    let resid: Vec<f64> = b.iter().zip(&ax).map(|(b, p)| (b - p) * scale).collect();
    state.e = Matrix::from_fn(m, n, |r, c| resid[r] * state.x[c]);
    state.flops.add((m * sup.len() + 2 * m + n + m * n) as u64);
}

/// One outer iteration: a full coordinate sweep then the `E` update.
pub fn adcd_step(state: &mut AdcdState, a: &Matrix, b: &[f64], lambda: f64) -> Result<IterRecord> {
    for i in 0..a.cols() {
        adcd_coordinate_update(state, a, b, lambda, i)?;
    }
    adcd_perturbation_update(state, a, b);
    state.n += 1;

    // Trace bookkeeping is not charged to the flop counter.
    let ax = a.matvec_support(&state.x, &support(&state.x));
    let resid_sq: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    let f = resid_sq / (norm_sq(&state.x) + 1.0);
    Ok(IterRecord {
        iteration: state.n,
        cost: composite(f, &state.x, lambda),
        f,
        step: None,
        backtracks: 0,
        flops: state.flops.get(),
        sq_error: None,
    })
}

/// The joint objective `‖(A + E)x − b‖² + ‖E‖²_F + λ‖x‖₁` that AD-CD descends.
pub fn adcd_objective(a: &Matrix, e: &Matrix, b: &[f64], x: &[f64], lambda: f64) -> Result<f64> {
    let corrected = a.add(e)?;
    let fit = corrected.matvec(x)?;
    check_len("adcd_objective: b", fit.len(), b.len())?;
    let resid_sq: f64 = fit.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(resid_sq + norm_sq(e.as_slice()) + lambda * norm_l1(x))
}

/// Runs `iterations` outer AD-CD iterations from `x = 0`, `E = 0`.
pub fn adcd_solve(
    a: &Matrix,
    b: &[f64],
    lambda: f64,
    iterations: usize,
    ground_truth: Option<&[f64]>,
) -> Result<SolveResult> {
    check_len("adcd_solve: rows of A vs b", a.rows(), b.len())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    if let Some(t) = ground_truth {
        check_len("adcd_solve: ground truth", a.cols(), t.len())?;
    }
    let mut state = adcd_init(a.rows(), a.cols());
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut rec = adcd_step(&mut state, a, b, lambda)?;
        rec.sq_error = ground_truth.map(|t| squared_error(&state.x, t).expect("length checked"));
        trace.push(rec);
    }
    Ok(SolveResult {
        x: state.x,
        trace,
    })
}
