use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1, Zip};

use super::{check_positive, check_same_dim, check_strictly_positive, CostMatrix, EntotError, Histogram, Result};
use crate::adom::DualOracle;

fn check_inputs(q: &Histogram, m: &CostMatrix, gamma: f64, z: ArrayView1<'_, f64>) -> Result<()> {
    check_positive("gamma", gamma)?;
    check_same_dim(q, m)?;
    check_strictly_positive(q)?;
    if z.len() != m.dim() {
        return Err(EntotError::DimensionMismatch { expected: m.dim(), got: z.len() });
    }
    Ok(())
}

fn entropy_term(q: ArrayView1<'_, f64>) -> f64 {
    q.iter().map(|v| v * v.ln()).sum()
}

/// `(ln Σ_i exp((z_i − M_ij)/γ))_j` with per-column max subtraction.
fn column_lse(m: &CostMatrix, gamma: f64, z: ArrayView1<'_, f64>, scratch: &mut [f64]) -> Array1<f64> {
    let d = m.dim();
    let mut lse = Array1::zeros(d);
    for j in 0..d {
        let col = m.entries().column(j);
        let mut max = f64::NEG_INFINITY;
        for i in 0..d {
            let a = (z[i] - col[i]) / gamma;
            scratch[i] = a;
            max = max.max(a);
        }
        let s: f64 = scratch[..d].iter().map(|a| (a - max).exp()).sum();
        lse[j] = max + s.ln();
    }
    lse
}

fn log_domain_value(q: ArrayView1<'_, f64>, m: &CostMatrix, gamma: f64, z: ArrayView1<'_, f64>) -> f64 {
    let mut scratch = vec![0.0; m.dim()];
    let lse = column_lse(m, gamma, z, &mut scratch);
    -gamma * entropy_term(q) + gamma * q.dot(&lse)
}

fn log_domain_grad(q: ArrayView1<'_, f64>, m: &CostMatrix, gamma: f64, z: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>) {
    let d = m.dim();
    let mut scratch = vec![0.0; d];
    let lse = column_lse(m, gamma, z, &mut scratch);
    out.fill(0.0);
    for j in 0..d {
        let col = m.entries().column(j);
        let w = q[j];
        for l in 0..d {
            out[l] += w * ((z[l] - col[l]) / gamma - lse[j]).exp();
        }
    }
}

/// `W*_{γ,q}(z) = −γ⟨q, ln q⟩ + γ Σ_j q_j ln Σ_i exp((z_i − M_ij)/γ)`.
pub fn dual_value(q: &Histogram, m: &CostMatrix, gamma: f64, z: ArrayView1<'_, f64>) -> Result<f64> {
    check_inputs(q, m, gamma, z)?;
    Ok(log_domain_value(q.mass(), m, gamma, z))
}

/// `∇W*_{γ,q}(z)`: column softmaxes of `(z − M_{·j})/γ` mixed with weights `q_j`.
pub fn dual_grad(q: &Histogram, m: &CostMatrix, gamma: f64, z: ArrayView1<'_, f64>) -> Result<Histogram> {
    check_inputs(q, m, gamma, z)?;
    let mut out = Array1::zeros(m.dim());
    log_domain_grad(q.mass(), m, gamma, z, out.view_mut());
    Ok(Histogram::from_raw(out))
}

/// Smallest kernel entry `exp(−M/γ)` for which the kernel path is used.
const KERNEL_FLOOR: f64 = 1e-200;

/// The barycenter dual: node `i` holds `f_i = W_{γ,q_i}`.
///
/// When every entry of `K = exp(−M/γ)` is comfortably representable the
/// gradient is `u ⊙ K (q ⊘ K u)` with `u = exp((z − max z)/γ)`, two
/// matrix-vector products and `d` exponentials. Otherwise it falls back to
/// the column-wise log-domain formulas.
#[derive(Debug, Clone)]
pub struct WbDualOracle {
    qs: Array2<f64>,
    cost: CostMatrix,
    gamma: f64,
    kernel: Option<Array2<f64>>,
    entropy: Vec<f64>,
}

impl WbDualOracle {
    /// Every histogram must have minimum mass at least `delta > 0`.
    pub fn new(qs: &[Histogram], cost: CostMatrix, gamma: f64, delta: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        check_positive("delta", delta)?;
        let d = cost.dim();
        if qs.is_empty() {
            return Err(EntotError::InvalidHistogram("no histograms".into()));
        }
        let mut stacked = Array2::zeros((qs.len(), d));
        for (node, q) in qs.iter().enumerate() {
            check_same_dim(q, &cost)?;
            let min = q.min();
            // allow the rounding of (1 − δd) q + δ
            if min < delta * (1.0 - 1e-9) {
                return Err(EntotError::NotFloored { node, min, delta });
            }
            stacked.row_mut(node).assign(&q.mass());
        }
        let kernel = cost.entries().mapv(|c| (-c / gamma).exp());
        let kernel = (kernel.iter().all(|k| *k >= KERNEL_FLOOR)).then_some(kernel);
        let entropy = stacked.rows().into_iter().map(entropy_term).collect();
        Ok(Self { qs: stacked, cost, gamma, kernel, entropy })
    }

    pub fn histograms(&self) -> &Array2<f64> {
        &self.qs
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Whether the precomputed-kernel path is active.
    pub fn uses_kernel(&self) -> bool {
        self.kernel.is_some()
    }

    /// `u = exp((z − max z)/γ)` and `K u`.
    fn scaled(&self, kernel: &Array2<f64>, z: ArrayView1<'_, f64>) -> (f64, Array1<f64>, Array1<f64>) {
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let u = z.mapv(|v| ((v - zmax) / self.gamma).exp());
        let ku = kernel.dot(&u);
        (zmax, u, ku)
    }
}

impl DualOracle for WbDualOracle {
    fn nodes(&self) -> usize {
        self.qs.nrows()
    }

    fn dim(&self) -> usize {
        self.qs.ncols()
    }

    fn strong_convexity(&self) -> f64 {
        self.gamma
    }

    fn conj_value(&self, node: usize, z: ArrayView1<'_, f64>) -> f64 {
        let q = self.qs.row(node);
        match &self.kernel {
            Some(kernel) => {
                let (zmax, _, ku) = self.scaled(kernel, z);
                let s: f64 = Zip::from(&q).and(&ku).fold(0.0, |acc, w, k| acc + w * k.ln());
                -self.gamma * self.entropy[node] + zmax + self.gamma * s
            }
            None => log_domain_value(q, &self.cost, self.gamma, z),
        }
    }

    fn grad_conj(&self, node: usize, z: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>) {
        let q = self.qs.row(node);
        match &self.kernel {
            Some(kernel) => {
                let (_, u, ku) = self.scaled(kernel, z);
                let ratio = &q / &ku;
                let back = kernel.dot(&ratio);
                Zip::from(&mut out).and(&u).and(&back).for_each(|o, a, b| *o = a * b);
            }
            None => log_domain_grad(q, &self.cost, self.gamma, z, out),
        }
    }

    fn prefers_parallel(&self) -> bool {
        self.dim() >= 128
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entot::floor_histogram;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, d: usize) -> (Histogram, CostMatrix) {
        let pts = Array2::from_shape_fn((d, 2), |_| rng.random::<f64>());
        let m = super::super::cost_matrix(pts.view(), true).unwrap();
        let w = Array1::from_shape_fn(d, |_| rng.random::<f64>() + 0.05);
        (Histogram::from_weights(w).unwrap(), m)
    }

    #[test]
    fn zero_cost_uniform() {
        let d = 4;
        let m = CostMatrix::new(Array2::zeros((d, d))).ok();
        // zero off-diagonals are allowed
        let m = m.unwrap();
        let q = Histogram::uniform(d);
        let z = Array1::zeros(d);
        let v = dual_value(&q, &m, 0.3, z.view()).unwrap();
        assert!((v - 2.0 * 0.3 * (d as f64).ln()).abs() < 1e-14);
        let g = dual_grad(&Histogram::new(array![0.1, 0.2, 0.3, 0.4]).unwrap(), &m, 0.3, z.view()).unwrap();
        assert!(g.mass().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn shift_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (q, m) = random_instance(&mut rng, 6);
        let z = Array1::from_shape_fn(6, |_| rng.random::<f64>() - 0.5);
        let zc = &z + 0.7;
        let g = 0.05;
        let v0 = dual_value(&q, &m, g, z.view()).unwrap();
        let v1 = dual_value(&q, &m, g, zc.view()).unwrap();
        assert!((v1 - v0 - 0.7).abs() < 1e-12);
        let g0 = dual_grad(&q, &m, g, z.view()).unwrap();
        let g1 = dual_grad(&q, &m, g, zc.view()).unwrap();
        assert!(g0.l1_distance(&g1) < 1e-12);
    }

    #[test]
    fn no_overflow_for_large_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (q, m) = random_instance(&mut rng, 5);
        let gamma = 1e-2;
        let z = array![100.0, -100.0, 50.0, 0.0, -20.0];
        let v = dual_value(&q, &m, gamma, z.view()).unwrap();
        assert!(v.is_finite());
        let g = dual_grad(&q, &m, gamma, z.view()).unwrap();
        assert!((g.mass().sum() - 1.0).abs() < 1e-12);
        assert!(g.mass().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let q = Histogram::new(array![1.0, 0.0]).unwrap();
        let z = array![0.0, 0.0];
        assert_eq!(dual_value(&q, &m, 0.1, z.view()).unwrap_err(), EntotError::ZeroEntry { index: 1 });
        let q = Histogram::uniform(2);
        assert!(matches!(dual_grad(&q, &m, 0.0, z.view()), Err(EntotError::NonPositive { .. })));
        assert!(dual_grad(&q, &m, 0.1, array![0.0].view()).is_err());
    }

    #[test]
    fn oracle_paths_agree_with_log_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 12;
        let (q, m) = random_instance(&mut rng, d);
        let delta = 1e-6;
        let q = floor_histogram(&q, delta).unwrap();
        for gamma in [0.5, 0.01] {
            let oracle = WbDualOracle::new(std::slice::from_ref(&q), m.clone(), gamma, delta).unwrap();
            assert!(oracle.uses_kernel());
            for _ in 0..5 {
                let z = Array1::from_shape_fn(d, |_| 3.0 * (rng.random::<f64>() - 0.5));
                let mut fast = Array1::zeros(d);
                oracle.grad_conj(0, z.view(), fast.view_mut());
                let slow = dual_grad(&q, &m, gamma, z.view()).unwrap();
                let err: f64 = (&fast - &slow.mass()).mapv(f64::abs).sum();
                assert!(err < 1e-12, "gamma {gamma}: {err}");
                let fv = oracle.conj_value(0, z.view());
                let sv = dual_value(&q, &m, gamma, z.view()).unwrap();
                assert!((fv - sv).abs() < 1e-12 * sv.abs().max(1.0));
            }
        }
        // tiny γ disables the kernel path
        let oracle = WbDualOracle::new(std::slice::from_ref(&q), m.clone(), 1e-3, delta).unwrap();
        assert!(!oracle.uses_kernel());
        let z = Array1::from_shape_fn(d, |i| i as f64 * 0.01);
        let mut out = Array1::zeros(d);
        oracle.grad_conj(0, z.view(), out.view_mut());
        let want = dual_grad(&q, &m, 1e-3, z.view()).unwrap();
        assert!((&out - &want.mass()).mapv(f64::abs).sum() < 1e-14);
    }

    #[test]
    fn oracle_requires_floor() {
        let m = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let q = Histogram::new(array![0.9999, 0.0001]).unwrap();
        let err = WbDualOracle::new(&[q], m, 0.1, 1e-3).unwrap_err();
        assert!(matches!(err, EntotError::NotFloored { node: 0, .. }));
    }
}
