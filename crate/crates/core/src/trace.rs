/// One accepted iteration of either solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    /// Composite cost `f + λ‖x‖₁` at the new iterate.
    pub cost: f64,
    /// Rayleigh-quotient residual at the new iterate.
    pub f: f64,
    /// Accepted step size (proximal gradient only).
    pub step: Option<f64>,
    /// Step-size halvings spent before acceptance.
    pub backtracks: usize,
    /// Cumulative multiply-adds, including one-time precomputation.
    pub flops: u64,
    /// `‖x − x_true‖²` when a ground truth was supplied.
    pub sq_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub trace: Vec<IterRecord>,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_cost(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn total_flops(&self) -> u64 {
        self.trace.last().map_or(0, |r| r.flops)
    }
}
