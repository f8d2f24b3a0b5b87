//! Closed-form step sizes and the advisory iteration count.

use serde::{Deserialize, Serialize};

use super::{check_positive, AdomError, Result};
use crate::netgraph::SpectralBounds;

/// The five step parameters shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub eta: f64,
    pub theta: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl StepSizes {
    fn validated(self) -> Result<Self> {
        check_positive("alpha", self.alpha)?;
        check_positive("eta", self.eta)?;
        check_positive("theta", self.theta)?;
        check_positive("sigma", self.sigma)?;
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(AdomError::TauOutOfRange(self.tau));
        }
        Ok(self)
    }
}

/// Parameters of Modified ADOM for dual regularization `r` and primal
/// strong convexity `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdomParams {
    pub r: f64,
    pub gamma: f64,
    pub bounds: SpectralBounds,
    pub steps: StepSizes,
}

/// Step sizes of Modified ADOM:
///
/// ```text
/// α = r/2
/// η = 2 λ_min⁺ √γ / (7 λ_max √(r(1 + rγ)))
/// θ = γ / (λ_max (1 + rγ))
/// σ = 1 / λ_max
/// τ = (λ_min⁺ / (7 λ_max)) √(rγ / (1 + rγ))
/// ```
pub fn derive_params(r: f64, gamma: f64, bounds: SpectralBounds) -> Result<AdomParams> {
    check_positive("r", r)?;
    check_positive("gamma", gamma)?;
    check_positive("lambda_min_plus", bounds.lambda_min_plus)?;
    check_positive("lambda_max", bounds.lambda_max)?;
    let (lmin, lmax) = (bounds.lambda_min_plus, bounds.lambda_max);
    let rg1 = 1.0 + r * gamma;
    let steps = StepSizes {
        alpha: r / 2.0,
        eta: 2.0 * lmin * gamma.sqrt() / (7.0 * lmax * (r * rg1).sqrt()),
        theta: gamma / (lmax * rg1),
        sigma: 1.0 / lmax,
        tau: lmin / (7.0 * lmax) * (r * gamma / rg1).sqrt(),
    }
    .validated()?;
    Ok(AdomParams { r, gamma, bounds, steps })
}

/// Step sizes of plain ADOM for `L`-smooth, `μ`-strongly convex node functions.
pub fn baseline_params(smoothness: f64, strong_convexity: f64, bounds: SpectralBounds) -> Result<StepSizes> {
    let l = check_positive("smoothness", smoothness)?;
    let mu = check_positive("strong_convexity", strong_convexity)?;
    let (lmin, lmax) = (bounds.lambda_min_plus, bounds.lambda_max);
    StepSizes {
        alpha: 1.0 / (2.0 * l),
        eta: 2.0 * lmin * (mu * l).sqrt() / (7.0 * lmax),
        theta: mu / lmax,
        sigma: 1.0 / lmax,
        tau: lmin / (7.0 * lmax) * (mu / l).sqrt(),
    }
    .validated()
}

/// `C₂ = m(1+rγ)K/(√2 γ) · √(λ_max/λ_min⁺) + m(1+rγ)²/(4rγ²)`, where `K`
/// bounds the primal gradient norms near the solution.
pub fn rate_constant_c2(m: usize, grad_bound: f64, r: f64, gamma: f64, bounds: SpectralBounds) -> f64 {
    let m = m as f64;
    let rg1 = 1.0 + r * gamma;
    m * rg1 * grad_bound / (std::f64::consts::SQRT_2 * gamma) * bounds.condition_number().sqrt()
        + m * rg1 * rg1 / (4.0 * r * gamma * gamma)
}

/// Advisory iteration count
/// `⌈(7λ_max/λ_min⁺) √((1+rγ)/(rγ)) ln(2C₂/ε)⌉` (zero if `2C₂ ≤ ε`).
pub fn iteration_estimate(eps: f64, r: f64, gamma: f64, bounds: SpectralBounds, c2: f64) -> Result<u64> {
    check_positive("eps", eps)?;
    check_positive("r", r)?;
    check_positive("gamma", gamma)?;
    check_positive("c2", c2)?;
    let rg = r * gamma;
    let n = 7.0 * bounds.condition_number() * ((1.0 + rg) / rg).sqrt() * (2.0 * c2 / eps).ln();
    Ok(n.max(0.0).ceil() as u64)
}
