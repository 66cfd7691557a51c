//! Reconstruction error, support-detection counts and cross-trial means.

use crate::error::{check_len, Error, Result};

/// `‖x_hat − x_true‖²`.
pub fn squared_error(x_hat: &[f64], x_true: &[f64]) -> Result<f64> {
    check_len("squared_error", x_true.len(), x_hat.len())?;
    Ok(x_hat
        .iter()
        .zip(x_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Support-detection errors of an estimate. Zero tests are exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SupportErrors {
    /// True nonzeros estimated as zero.
    pub false_negatives: usize,
    /// True zeros estimated as nonzero.
    pub false_positives: usize,
    /// Nonzeros in the truth (K).
    pub positives: usize,
    /// Zeros in the truth (N − K).
    pub negatives: usize,
}

impl SupportErrors {
    pub fn fn_rate(&self) -> f64 {
        ratio(self.false_negatives, self.positives)
    }

    pub fn fp_rate(&self) -> f64 {
        ratio(self.false_positives, self.negatives)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn support_errors(x_hat: &[f64], x_true: &[f64]) -> Result<SupportErrors> {
    check_len("support_errors", x_true.len(), x_hat.len())?;
    let mut out = SupportErrors::default();
    for (&est, &truth) in x_hat.iter().zip(x_true) {
        if truth != 0.0 {
            out.positives += 1;
            if est == 0.0 {
                out.false_negatives += 1;
            }
        } else {
            out.negatives += 1;
            if est != 0.0 {
                out.false_positives += 1;
            }
        }
    }
    Ok(out)
}

/// What one trial of one algorithm produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialOutcome {
    pub sq_error: f64,
    pub support: SupportErrors,
}

impl TrialOutcome {
    pub fn evaluate(x_hat: &[f64], x_true: &[f64]) -> Result<Self> {
        Ok(TrialOutcome {
            sq_error: squared_error(x_hat, x_true)?,
            support: support_errors(x_hat, x_true)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub scenario: String,
    pub algorithm: String,
    /// Value of the swept parameter (λ or ξ).
    pub param: f64,
    pub mean_sq_error: f64,
    pub mean_fn: f64,
    pub mean_fp: f64,
    pub mean_fn_rate: f64,
    pub mean_fp_rate: f64,
    pub trials: usize,
}

/// Arithmetic means over `outcomes`, summed in order.
pub fn aggregate(
    scenario: &str,
    algorithm: &str,
    param: f64,
    outcomes: &[TrialOutcome],
) -> Result<AggregateRow> {
    if outcomes.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let count = outcomes.len() as f64;
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / count;
    Ok(AggregateRow {
        scenario: scenario.to_string(),
        algorithm: algorithm.to_string(),
        param,
        mean_sq_error: mean(&|o| o.sq_error),
        mean_fn: mean(&|o| o.support.false_negatives as f64),
        mean_fp: mean(&|o| o.support.false_positives as f64),
        mean_fn_rate: mean(&|o| o.support.fn_rate()),
        mean_fp_rate: mean(&|o| o.support.fp_rate()),
        trials: outcomes.len(),
    })
}
