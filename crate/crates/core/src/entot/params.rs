use serde::{Deserialize, Serialize};

use super::{check_positive, CostMatrix, EntotError, Histogram, Result};

/// `(1 − δd) q + δ`, giving every entry at least `δ`.
pub fn floor_histogram(q: &Histogram, delta: f64) -> Result<Histogram> {
    let d = q.len();
    if !(delta > 0.0 && delta * (d as f64) < 1.0) {
        return Err(EntotError::DeltaOutOfRange { delta, d });
    }
    let scale = 1.0 - delta * d as f64;
    Ok(Histogram::from_raw(q.mass().mapv(|v| scale * v + delta)))
}

/// Squared dual-gradient bound
/// `K² = Σ_j (2γ ln d + inf_i sup_l |M_jl − M_il| − γ ln ρ)²`, with `ρ = δ/2`
/// unless given.
pub fn k_bound(m: &CostMatrix, gamma: f64, delta: f64, rho: Option<f64>) -> Result<f64> {
    check_positive("gamma", gamma)?;
    let d = m.dim();
    if !(delta > 0.0 && delta <= 1.0 / d as f64) {
        return Err(EntotError::DeltaOutOfRange { delta, d });
    }
    let rho = check_positive("rho", rho.unwrap_or(delta / 2.0))?;
    let c = m.entries();
    let base = 2.0 * gamma * (d as f64).ln() - gamma * rho.ln();
    let total = (0..d)
        .map(|j| {
            let spread = (0..d)
                .map(|i| (0..d).map(|l| (c[[j, l]] - c[[i, l]]).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            (base + spread).powi(2)
        })
        .sum();
    Ok(total)
}

/// Solver parameters targeting accuracy `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsParams {
    pub gamma: f64,
    pub r: f64,
    pub k_squared: f64,
}

/// `γ = ε/(8 ln d)`, `K² = k_bound(M, γ, δ)`, `r = ε/(4mK²)`.
pub fn params_for_eps(eps: f64, nodes: usize, m: &CostMatrix, delta: f64) -> Result<EpsParams> {
    check_positive("eps", eps)?;
    if nodes == 0 {
        return Err(EntotError::NonPositive { name: "m", value: 0.0 });
    }
    let d = m.dim();
    let gamma = eps / (8.0 * (d as f64).ln());
    let k_squared = k_bound(m, gamma, delta, None)?;
    let r = eps / (4.0 * nodes as f64 * k_squared);
    Ok(EpsParams { gamma, r, k_squared })
}
