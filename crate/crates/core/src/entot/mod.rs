//! Entropic optimal transport on a fixed support of `d` points.
//!
//! `W_γ(p, q) = min_{X ∈ U(p,q)} ⟨M, X⟩ + γ Σ X ln X`. Its conjugate in `p`
//! has a closed-form value and gradient ([`dual_value`], [`dual_grad`]),
//! which is all the barycenter solver needs ([`WbDualOracle`]). Exact and
//! Sinkhorn transport are only used for reporting.

mod dual;
mod exact;
mod params;
mod sinkhorn;

pub use dual::{dual_grad, dual_value, WbDualOracle};
pub use exact::{exact_ot, exact_plan};
pub use params::{floor_histogram, k_bound, params_for_eps, EpsParams};
pub use sinkhorn::{sinkhorn, SinkhornOutput, SINKHORN_MAX_ITER, SINKHORN_TOL};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntotError {
    #[error("need at least 2 support points, got {0}")]
    TooFewPoints(usize),

    #[error("support points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("histogram entry {index} is zero; a strictly positive histogram is required")]
    ZeroEntry { index: usize },

    #[error("delta = {delta} is out of range for d = {d}")]
    DeltaOutOfRange { delta: f64, d: usize },

    #[error("histogram {node} has minimum mass {min}, below the floor {delta}")]
    NotFloored { node: usize, min: f64, delta: f64 },

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("exact transport did not reach optimality within {pivots} pivots")]
    ExactOtStalled { pivots: usize },
}

pub type Result<T> = std::result::Result<T, EntotError>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(EntotError::NonPositive { name, value })
    }
}

/// Tolerance on `Σ = 1` for [`Histogram::new`].
pub const MASS_TOL: f64 = 1e-12;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram(Array1<f64>);

impl Histogram {
    /// Validates nonnegativity and unit mass.
    pub fn new(mass: Array1<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(EntotError::InvalidHistogram("empty".into()));
        }
        if let Some((i, v)) = mass.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(EntotError::InvalidHistogram(format!("entry {i} is {v}")));
        }
        let total = mass.sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(EntotError::InvalidHistogram(format!("mass sums to {total}")));
        }
        Ok(Self(mass))
    }

    /// Normalizes nonnegative weights with positive total.
    pub fn from_weights(weights: Array1<f64>) -> Result<Self> {
        let total: f64 = weights.sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(EntotError::InvalidHistogram(format!("cannot normalize weights with total {total}")));
        }
        Ok(Self(weights / total))
    }

    pub fn uniform(d: usize) -> Self {
        Self(Array1::from_elem(d, 1.0 / d as f64))
    }

    /// Clips negative entries to zero and renormalizes; the Euclidean
    /// projection is used instead if nothing positive remains.
    pub fn clipped(v: ArrayView1<'_, f64>) -> Self {
        let w = v.mapv(|x| if x.is_finite() { x.max(0.0) } else { 0.0 });
        let total = w.sum();
        if total > 0.0 {
            Self(w / total)
        } else {
            project_to_simplex(v)
        }
    }

    pub(crate) fn from_raw(mass: Array1<f64>) -> Self {
        Self(mass)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mass(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    /// `(1 − δd) q + δ`.
    pub fn floor(&self, delta: f64) -> Result<Self> {
        floor_histogram(self, delta)
    }

    pub fn l1_distance(&self, other: &Histogram) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl AsRef<Array1<f64>> for Histogram {
    fn as_ref(&self) -> &Array1<f64> {
        &self.0
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: ArrayView1<'_, f64>) -> Histogram {
    let d = v.len();
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            shift = t;
        }
    }
    let mut out = v.mapv(|x| (x - shift).max(0.0));
    let total = out.sum();
    if total > 0.0 {
        out /= total;
    } else {
        out.fill(1.0 / d as f64);
    }
    Histogram(out)
}

/// Ground cost between the `d` support points.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
    support: Option<Array2<f64>>,
}

impl CostMatrix {
    /// Accepts any symmetric, nonnegative matrix with zero diagonal.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (d, c) = entries.dim();
        if d != c {
            return Err(EntotError::DimensionMismatch { expected: d, got: c });
        }
        if d < 2 {
            return Err(EntotError::TooFewPoints(d));
        }
        for i in 0..d {
            if entries[[i, i]] != 0.0 {
                return Err(EntotError::InvalidCost(format!("diagonal entry {i} is {}", entries[[i, i]])));
            }
            for j in 0..i {
                let (a, b) = (entries[[i, j]], entries[[j, i]]);
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(EntotError::InvalidCost(format!("entry ({i}, {j}) is {a}")));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(EntotError::InvalidCost(format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { entries, support: None })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    /// The points the matrix was built from, one per row, if known.
    pub fn support(&self) -> Option<&Array2<f64>> {
        self.support.as_ref()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

/// `M_ij = ‖ω_i − ω_j‖²` for points given as rows; optionally scaled so the
/// largest entry is 1.
pub fn cost_matrix(points: ArrayView2<'_, f64>, normalize: bool) -> Result<CostMatrix> {
    let d = points.nrows();
    if d < 2 {
        return Err(EntotError::TooFewPoints(d));
    }
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..i {
            let diff = &points.row(i) - &points.row(j);
            let c = diff.dot(&diff);
            if c == 0.0 {
                return Err(EntotError::DuplicatePoint(j, i));
            }
            m[[i, j]] = c;
            m[[j, i]] = c;
        }
    }
    if normalize {
        let max = m.iter().copied().fold(0.0, f64::max);
        m /= max;
    }
    Ok(CostMatrix { entries: m, support: Some(points.to_owned()) })
}

/// A coupling with its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Array2<f64>,
}

impl TransportPlan {
    pub(crate) fn from_entries(entries: Array2<f64>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Row sums.
    pub fn source(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(1))
    }

    /// Column sums.
    pub fn target(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(0))
    }

    pub fn cost(&self, m: &CostMatrix) -> f64 {
        (&self.entries * m.entries()).sum()
    }

    /// `ℓ¹` distance of the two marginals from `p` and `q`, summed.
    pub fn marginal_error(&self, p: &Histogram, q: &Histogram) -> f64 {
        let row: f64 = (&self.source() - &p.mass()).mapv(f64::abs).sum();
        let col: f64 = (&self.target() - &q.mass()).mapv(f64::abs).sum();
        row + col
    }
}

pub(crate) fn check_same_dim(h: &Histogram, m: &CostMatrix) -> Result<()> {
    if h.len() != m.dim() {
        return Err(EntotError::DimensionMismatch { expected: m.dim(), got: h.len() });
    }
    Ok(())
}

pub(crate) fn check_strictly_positive(h: &Histogram) -> Result<()> {
    match h.mass().iter().position(|v| *v <= 0.0) {
        Some(index) => Err(EntotError::ZeroEntry { index }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn line_costs() {
        let pts = array![[0.0], [1.0], [2.0]];
        let m = cost_matrix(pts.view(), false).unwrap();
        assert_eq!(m.entries(), &array![[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]]);
        let n = cost_matrix(pts.view(), true).unwrap();
        assert_eq!(n.entries(), &array![[0.0, 0.25, 1.0], [0.25, 0.0, 0.25], [1.0, 0.25, 0.0]]);
        assert!(n.support().is_some());
    }

    #[test]
    fn cost_rejects_degenerate_supports() {
        assert_eq!(cost_matrix(array![[1.0, 2.0]].view(), true).unwrap_err(), EntotError::TooFewPoints(1));
        assert_eq!(
            cost_matrix(array![[0.0], [1.0], [0.0]].view(), true).unwrap_err(),
            EntotError::DuplicatePoint(0, 2)
        );
    }

    #[test]
    fn cost_new_validates() {
        assert!(CostMatrix::new(array![[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(CostMatrix::new(array![[1.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(CostMatrix::new(array![[0.0, -1.0], [-1.0, 0.0]]).is_err());
        assert!(CostMatrix::new(array![[0.0, 3.0], [3.0, 0.0]]).is_ok());
    }

    #[test]
    fn histogram_validation() {
        assert!(Histogram::new(array![0.5, 0.5]).is_ok());
        assert!(Histogram::new(array![0.5, 0.6]).is_err());
        assert!(Histogram::new(array![1.5, -0.5]).is_err());
        assert!(Histogram::new(array![f64::NAN, 1.0]).is_err());
        let h = Histogram::from_weights(array![1.0, 3.0]).unwrap();
        assert_eq!(h.mass(), array![0.25, 0.75]);
        assert!(Histogram::from_weights(array![0.0, 0.0]).is_err());
    }

    #[test]
    fn projection_known_cases() {
        let p = project_to_simplex(array![0.5, 0.5, 0.0].view());
        assert_eq!(p.mass(), array![0.5, 0.5, 0.0]);
        let p = project_to_simplex(array![2.0, 0.0].view());
        assert_eq!(p.mass(), array![1.0, 0.0]);
        let p = project_to_simplex(array![1.0, 1.0, 1.0].view());
        assert!(p.mass().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn clipping_renormalizes() {
        let h = Histogram::clipped(array![0.6, -0.1, 0.5].view());
        assert!((h.mass()[0] - 0.6 / 1.1).abs() < 1e-15);
        assert_eq!(h.mass()[1], 0.0);
        let h = Histogram::clipped(array![-1.0, -2.0].view());
        assert_eq!(h.mass(), array![1.0, 0.0]);
    }

    #[test]
    fn plan_marginals() {
        let plan = TransportPlan::from_entries(array![[0.25, 0.25], [0.0, 0.5]]);
        let p = Histogram::new(array![0.5, 0.5]).unwrap();
        let q = Histogram::new(array![0.25, 0.75]).unwrap();
        assert_eq!(plan.marginal_error(&p, &q), 0.0);
        let m = CostMatrix::new(array![[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(plan.cost(&m), 0.5);
    }
}
