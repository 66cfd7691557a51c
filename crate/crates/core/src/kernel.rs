//! Shared math for both solvers: the Rayleigh-quotient residual
//! `f(x) = ‖Ax − b‖² / (‖x‖² + 1)`, its gradient, the composite cost
//! `c = f + λ‖x‖₁`, and soft-thresholding.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_l1, norm_sq, support, Matrix};

/// Multiply-add counter used to compare per-iteration work across solvers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlopCounter(u64);

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, multiply_adds: u64) {
        self.0 += multiply_adds;
    }

    #[inline]
    pub fn get(&self) -> u64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEval {
    /// Rayleigh-quotient residual.
    pub f: f64,
    /// `1 / (‖x‖² + 1)`.
    pub y: f64,
    /// `λ‖x‖₁`.
    pub r: f64,
    /// `f + r`.
    pub c: f64,
}

pub fn eval_cost(a: &Matrix, b: &[f64], x: &[f64], lambda: f64) -> Result<CostEval> {
    check_len("eval_cost: rows of A vs b", a.rows(), b.len())?;
    check_len("eval_cost: cols of A vs x", a.cols(), x.len())?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (y, f) = rayleigh_residual(a, b, x, &support(x), &mut FlopCounter::new());
    let r = lambda * norm_l1(x);
    Ok(CostEval { f, y, r, c: f + r })
}

/// `(y, f)` at `x`, computing `Ax` only over `support`.
pub(crate) fn rayleigh_residual(
    a: &Matrix,
    b: &[f64],
    x: &[f64],
    support: &[usize],
    flops: &mut FlopCounter,
) -> (f64, f64) {
    let ax = a.matvec_support(x, support);
    let resid_sq: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    let y = 1.0 / (norm_sq(x) + 1.0);
    flops.add((a.rows() * support.len() + a.rows() + x.len()) as u64);
    (y, y * resid_sq)
}

/// `AᵀA` and `Aᵀb`, formed once per solve.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    pub gram: Matrix,
    pub atb: Vec<f64>,
}

impl NormalEquations {
    pub fn new(a: &Matrix, b: &[f64], flops: &mut FlopCounter) -> Result<Self> {
        let atb = a.transpose_matvec(b)?;
        let gram = a.gram();
        let (m, n) = (a.rows() as u64, a.cols() as u64);
        flops.add(m * n + m * n * (n + 1) / 2);
        Ok(NormalEquations { gram, atb })
    }

    pub fn dim(&self) -> usize {
        self.atb.len()
    }
}

/// `g = 2y(AᵀAx − Aᵀb − f·x)`, the gradient of the Rayleigh-quotient
/// residual, given consistent `y` and `f` at `x`. Columns of `AᵀA` whose
/// `x` entry is exactly zero are skipped.
pub fn gradient(
    normal: &NormalEquations,
    x: &[f64],
    y: f64,
    f: f64,
    flops: &mut FlopCounter,
) -> Result<Vec<f64>> {
    let n = normal.dim();
    check_len("gradient: x", n, x.len())?;
    let mut g: Vec<f64> = normal.atb.iter().map(|v| -v).collect();
    let mut nnz = 0u64;
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        nnz += 1;
        // AᵀA is symmetric, so row j is column j.
        for (gi, &gij) in g.iter_mut().zip(normal.gram.row(j)) {
            *gi += gij * xj;
        }
    }
    for (gi, &xi) in g.iter_mut().zip(x) {
        *gi = 2.0 * y * (*gi - f * xi);
    }
    flops.add(n as u64 * nnz + 3 * n as u64);
    Ok(g)
}

/// Soft-thresholding: the proximity operator of `t‖·‖₁`. Entries with
/// `|z_i| <= t` map to exactly zero.
pub fn shrink(z: &[f64], t: f64) -> Vec<f64> {
    debug_assert!(t >= 0.0);
    z.iter().map(|&v| soft_threshold(v, t)).collect()
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Composite cost `f + λ‖x‖₁` from an already-known `f`.
#[inline]
pub fn composite(f: f64, x: &[f64], lambda: f64) -> f64 {
    f + lambda * norm_l1(x)
}

/// Directional term `(x_next − x)ᵀ g`.
#[inline]
pub(crate) fn step_inner(dx: &[f64], g: &[f64]) -> f64 {
    dot(dx, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye2() -> Matrix {
        Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]])
    }

    #[test]
    fn cost_at_origin() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[0.5, -1.0, 2.0]]);
        let b = [3.0, -4.0];
        let c = eval_cost(&a, &b, &[0.0; 3], 0.7).unwrap();
        assert_eq!(c.f, 25.0);
        assert_eq!(c.y, 1.0);
        assert_eq!(c.r, 0.0);
        assert_eq!(c.c, 25.0);
    }

    #[test]
    fn cost_exact_solution() {
        let c = eval_cost(&eye2(), &[3.0, 4.0], &[3.0, 4.0], 1.0).unwrap();
        assert_eq!(c.f, 0.0);
        assert_eq!(c.c, 7.0);
        assert_eq!(c.y, 1.0 / 26.0);
    }

    #[test]
    fn cost_hand_example() {
        // residual [-1, 1], ‖r‖² = 2, ‖x‖² + 1 = 2
        let c = eval_cost(&eye2(), &[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap();
        assert_eq!(c.f, 1.0);
        assert_eq!(c.r, 0.5);
        assert_eq!(c.c, 1.5);
    }

    #[test]
    fn cost_rejects_bad_input() {
        assert!(eval_cost(&eye2(), &[1.0], &[0.0, 1.0], 0.5).is_err());
        assert!(eval_cost(&eye2(), &[1.0, 0.0], &[0.0], 0.5).is_err());
        assert!(eval_cost(&eye2(), &[1.0, 0.0], &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn gradient_at_origin_is_minus_two_atb() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[0.5, -1.0, 2.0]]);
        let b = [3.0, -4.0];
        let mut flops = FlopCounter::new();
        let ne = NormalEquations::new(&a, &b, &mut flops).unwrap();
        let g = gradient(&ne, &[0.0; 3], 1.0, 25.0, &mut flops).unwrap();
        let atb = a.transpose_matvec(&b).unwrap();
        for (gi, ai) in g.iter().zip(&atb) {
            assert_eq!(*gi, -2.0 * ai);
        }
    }

    #[test]
    fn gradient_hand_example() {
        let a = eye2();
        let b = [1.0, 0.0];
        let mut flops = FlopCounter::new();
        let ne = NormalEquations::new(&a, &b, &mut flops).unwrap();
        let g = gradient(&ne, &[0.0, 1.0], 0.5, 1.0, &mut flops).unwrap();
        assert_eq!(g, vec![-1.0, 0.0]);
    }

    #[test]
    fn gradient_vanishes_at_exact_solution() {
        let a = eye2();
        let b = [3.0, 4.0];
        let x = [3.0, 4.0];
        let mut flops = FlopCounter::new();
        let ne = NormalEquations::new(&a, &b, &mut flops).unwrap();
        let cost = eval_cost(&a, &b, &x, 1.0).unwrap();
        let g = gradient(&ne, &x, cost.y, cost.f, &mut flops).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_flops_track_sparsity() {
        let a = Matrix::from_fn(4, 10, |i, j| (i + 2 * j) as f64 * 0.1);
        let b = [1.0; 4];
        let mut flops = FlopCounter::new();
        let ne = NormalEquations::new(&a, &b, &mut flops).unwrap();
        let mut x = vec![0.0; 10];
        x[3] = 1.0;
        x[7] = -2.0;
        let before = flops.get();
        gradient(&ne, &x, 0.2, 0.3, &mut flops).unwrap();
        assert_eq!(flops.get() - before, 10 * 2 + 30);
    }

    #[test]
    fn shrink_cases() {
        let out = shrink(&[0.5, -0.1, -0.9], 0.2);
        assert!((out[0] - 0.3).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        assert!((out[2] + 0.7).abs() < 1e-15);
        assert_eq!(shrink(&[1.5, -2.0, 0.0], 0.0), vec![1.5, -2.0, 0.0]);
        assert_eq!(shrink(&[0.25, -0.25], 0.25), vec![0.0, 0.0]);
    }

    #[test]
    fn rayleigh_form_penalizes_scaling_truth() {
        let a = Matrix::from_rows(&[&[1.0, 0.0, 2.0], &[0.0, 1.0, -1.0]]);
        let x = [0.5, 0.0, 1.0];
        let b = a.matvec(&x).unwrap();
        for alpha in [0.0, 0.5, 0.9, 1.1, 2.0, -1.0] {
            let xs: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let c = eval_cost(&a, &b, &xs, 1.0).unwrap();
            assert!(c.f > 0.0, "alpha = {alpha}");
        }
        assert_eq!(eval_cost(&a, &b, &x, 1.0).unwrap().f, 0.0);
    }
}
