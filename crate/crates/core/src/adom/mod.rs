//! The dual solver.
//!
//! Both solvers minimize a conjugate `H*` over `R⊥ = {z : Σ_i z_i = 0}` using
//! only its gradient and one application of the round's Laplacian to two
//! stacks per iteration:
//!
//! ```text
//! z_g   = τ z + (1 − τ) z_f
//! g     = ∇H*(z_g)                      (one stacked oracle call)
//! Δ     = σ L (m − η g)
//! m'    = m − η g − Δ
//! z'    = z + η α (z_g − z) + Δ
//! z_f'  = z_g − θ L g
//! ```
//!
//! [`run`] is Modified ADOM: `∇H*` is the per-node conjugate gradient of a
//! γ-strongly convex primal plus `r·z`, and the step sizes come from
//! `(r, γ)` through [`derive_params`]. [`baseline_run`] is plain ADOM for a
//! user-supplied `∇H*` of an `L`-smooth, `μ`-strongly convex `H`.

mod oracle;
mod params;
mod solver;

pub use oracle::{
    DualOracle, LinearOnSimplex, ProxPrimal, QuadraticOracle, SmoothedOracle, StackedGradient, Tikhonov,
};
pub use params::{baseline_params, derive_params, iteration_estimate, rate_constant_c2, AdomParams, StepSizes};
pub use solver::{
    adom_step, baseline_run, consensus_metric, run, run_observed, sum_of_rows_norm, RunFailure, SolverState,
    Trajectory, TrajectoryRecord,
};

use thiserror::Error;

use crate::netgraph::NetgraphError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdomError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("tau must lie in (0, 1), got {0}")]
    TauOutOfRange(f64),

    #[error("numerical divergence at iteration {iteration}: {iterate} contains non-finite values")]
    Diverged { iteration: usize, iterate: &'static str },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },

    #[error("initial dual iterate must lie in R⊥ (rows summing to zero); row-sum norm is {0}")]
    NotInRPerp(f64),

    #[error("at least one iteration is required")]
    ZeroIterations,

    #[error("record_every must be at least 1")]
    ZeroRecordInterval,

    #[error("the consensus metric needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error(transparent)]
    Network(#[from] NetgraphError),
}

pub type Result<T> = std::result::Result<T, AdomError>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(AdomError::NonPositive { name, value })
    }
}
