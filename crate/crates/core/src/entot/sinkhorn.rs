use ndarray::{Array1, Array2};

use super::{check_positive, check_same_dim, check_strictly_positive, CostMatrix, Histogram, Result, TransportPlan};

/// Default `ℓ¹` marginal tolerance.
pub const SINKHORN_TOL: f64 = 1e-9;
/// Default iteration cap.
pub const SINKHORN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    /// `⟨M, X⟩ + γ Σ X ln X` at the returned plan.
    pub value: f64,
    pub plan: TransportPlan,
    pub converged: bool,
    pub iterations: usize,
    /// `ℓ¹` marginal residual (rows plus columns) of the returned plan.
    pub residual: f64,
}

fn lse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn with potentials `f, g`, so that
/// `X_ij = exp((f_i + g_j − M_ij)/γ)`.
///
/// Stops once both marginal residuals sum to at most `tol` in `ℓ¹`. When
/// `max_iter` runs out the iterate with the smallest residual is returned
/// with `converged = false`.
pub fn sinkhorn(
    p: &Histogram,
    q: &Histogram,
    m: &CostMatrix,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornOutput> {
    check_positive("gamma", gamma)?;
    check_same_dim(p, m)?;
    check_same_dim(q, m)?;
    check_strictly_positive(p)?;
    check_strictly_positive(q)?;
    let d = m.dim();
    let c = m.entries();
    let (lp, lq) = (p.mass().mapv(f64::ln), q.mass().mapv(f64::ln));
    let mut f = Array1::<f64>::zeros(d);
    let mut g = Array1::<f64>::zeros(d);
    let mut best: Option<(f64, Array1<f64>, Array1<f64>)> = None;
    let mut iterations = 0;

    let log_plan = |f: &Array1<f64>, g: &Array1<f64>| Array2::from_shape_fn((d, d), |(i, j)| (f[i] + g[j] - c[[i, j]]) / gamma);
    let residual_of = |lx: &Array2<f64>| {
        let x = lx.mapv(f64::exp);
        let rows: f64 = (0..d).map(|i| (x.row(i).sum() - p.mass()[i]).abs()).sum();
        let cols: f64 = (0..d).map(|j| (x.column(j).sum() - q.mass()[j]).abs()).sum();
        rows + cols
    };

    while iterations < max_iter.max(1) {
        iterations += 1;
        for i in 0..d {
            f[i] = gamma * lp[i] - gamma * lse((0..d).map(|j| (g[j] - c[[i, j]]) / gamma));
        }
        for j in 0..d {
            g[j] = gamma * lq[j] - gamma * lse((0..d).map(|i| (f[i] - c[[i, j]]) / gamma));
        }
        let residual = residual_of(&log_plan(&f, &g));
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, f.clone(), g.clone()));
        }
        if residual <= tol {
            break;
        }
    }

    let (residual, f, g) = best.expect("at least one iteration");
    let lx = log_plan(&f, &g);
    let x = lx.mapv(f64::exp);
    let value = (&x * c).sum() + gamma * (&x * &lx).sum();
    Ok(SinkhornOutput {
        value,
        plan: TransportPlan::from_entries(x),
        converged: residual <= tol,
        iterations,
        residual,
    })
}
