//! Sparse total least-squares reconstruction for perturbed compressive sensing.
//!
//! Given a sensing matrix and measurement vector that are *both* corrupted,
//! recovers a sparse signal by minimizing the ℓ₁-regularized Rayleigh quotient
//! `‖Ax − b‖² / (‖x‖² + 1) + λ‖x‖₁`. Two solvers are provided:
//!
//! - [`pg`]: proximal gradient with a hybrid spectral step size and
//!   backtracking, working off a precomputed `AᵀA` and `Aᵀb`;
//! - [`adcd`]: the alternating-direction coordinate-descent baseline, which
//!   also estimates the matrix perturbation explicitly.
//!
//! [`problem`] synthesizes reproducible test instances, [`metrics`] scores the
//! estimates and [`experiments`] drives the benchmark suite behind the CLI.

pub mod adcd;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod pg;
pub mod problem;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use trace::{IterRecord, SolveResult};
