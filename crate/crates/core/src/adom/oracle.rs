//! Oracle interfaces and the dual smoothing wrapper.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use ndarray::parallel::prelude::*;

use super::{check_positive, AdomError, Result};
use crate::entot::project_to_simplex;

/// Per-node access to the conjugate `(f_i^γ)*` of a γ-strongly convex primal.
///
/// Implementations must be callable concurrently for distinct nodes.
pub trait DualOracle: Sync {
    fn nodes(&self) -> usize;

    fn dim(&self) -> usize;

    /// Strong-convexity modulus γ of every primal `f_i^γ`; the conjugate
    /// gradients are `1/γ`-Lipschitz.
    fn strong_convexity(&self) -> f64;

    /// `(f_i^γ)*(z)`.
    fn conj_value(&self, node: usize, z: ArrayView1<'_, f64>) -> f64;

    /// Writes `∇(f_i^γ)*(z)` into `out`.
    fn grad_conj(&self, node: usize, z: ArrayView1<'_, f64>, out: ArrayViewMut1<'_, f64>);

    /// Whether per-node work is heavy enough to spread across threads.
    fn prefers_parallel(&self) -> bool {
        false
    }
}

/// A stacked gradient map `∇H* : (ℝ^d)^m → (ℝ^d)^m`.
pub trait StackedGradient: Sync {
    fn nodes(&self) -> usize;

    fn dim(&self) -> usize;

    fn eval(&self, z: ArrayView2<'_, f64>, out: ArrayViewMut2<'_, f64>);
}

/// `∇H*(z)_i = ∇(f_i^γ)*(z_i) + r z_i`, the gradient of
/// `Σ_i (f_i^γ)*(z_i) + (r/2)‖z_i‖²`.
///
/// Adding `(r/2)‖z‖²` to the conjugate is the dual side of Moreau–Yosida
/// smoothing the primal with parameter `r`: the smoothed primal
/// `h_i(x) = inf_y f_i(y) + ‖y − x‖²/(2r)` is `1/r`-smooth and
/// `γ/(1+rγ)`-strongly convex.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedOracle<'a, O> {
    base: &'a O,
    r: f64,
}

impl<'a, O: DualOracle> SmoothedOracle<'a, O> {
    pub fn new(base: &'a O, r: f64) -> Result<Self> {
        check_positive("r", r)?;
        Ok(Self { base, r })
    }

    pub fn base(&self) -> &'a O {
        self.base
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `H*(z) = Σ_i (f_i^γ)*(z_i) + (r/2)‖z_i‖²`.
    pub fn value(&self, z: ArrayView2<'_, f64>) -> f64 {
        z.outer_iter()
            .enumerate()
            .map(|(i, zi)| self.base.conj_value(i, zi) + 0.5 * self.r * zi.dot(&zi))
            .sum()
    }

    pub fn eval_node(&self, node: usize, z: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>) {
        self.base.grad_conj(node, z, out.view_mut());
        out.scaled_add(self.r, &z);
    }
}

impl<O: DualOracle> StackedGradient for SmoothedOracle<'_, O> {
    fn nodes(&self) -> usize {
        self.base.nodes()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, z: ArrayView2<'_, f64>, mut out: ArrayViewMut2<'_, f64>) {
        if self.base.prefers_parallel() {
            out.axis_iter_mut(Axis(0))
                .into_par_iter()
                .zip(z.axis_iter(Axis(0)).into_par_iter())
                .enumerate()
                .for_each(|(i, (o, zi))| self.eval_node(i, zi, o));
        } else {
            for (i, (o, zi)) in out.outer_iter_mut().zip(z.outer_iter()).enumerate() {
                self.eval_node(i, zi, o);
            }
        }
    }
}

/// `f_i(x) = (γ/2)‖x − c_i‖²` on all of `ℝ^d`.
///
/// Everything about it is closed-form, which makes it the reference problem
/// for the solver: `(f_i)*(z) = ⟨z, c_i⟩ + ‖z‖²/(2γ)`, the Moreau envelope is
/// `h_i(x) = γ‖x − c_i‖²/(2(1+rγ))`, and the consensus minimizer is the mean
/// of the centers.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    centers: Array2<f64>,
    gamma: f64,
}

impl QuadraticOracle {
    pub fn new(centers: Array2<f64>, gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(Self { centers, gamma })
    }

    pub fn centers(&self) -> &Array2<f64> {
        &self.centers
    }

    /// Primal value `f_i(x)`.
    pub fn value(&self, node: usize, x: ArrayView1<'_, f64>) -> f64 {
        let diff = &x - &self.centers.row(node);
        0.5 * self.gamma * diff.dot(&diff)
    }

    pub fn gradient(&self, node: usize, x: ArrayView1<'_, f64>) -> Array1<f64> {
        (&x - &self.centers.row(node)) * self.gamma
    }

    /// Closed-form Moreau envelope `γ‖x − c_i‖²/(2(1+rγ))`.
    pub fn moreau_envelope(&self, node: usize, x: ArrayView1<'_, f64>, r: f64) -> f64 {
        let diff = &x - &self.centers.row(node);
        self.gamma * diff.dot(&diff) / (2.0 * (1.0 + r * self.gamma))
    }

    /// The envelope evaluated through its definition at the proximal point
    /// `y* = (x + rγ c_i)/(1 + rγ)`: `f_i(y*) + ‖y* − x‖²/(2r)`.
    pub fn moreau_envelope_at_prox(&self, node: usize, x: ArrayView1<'_, f64>, r: f64) -> f64 {
        let rg = r * self.gamma;
        let y = (&x + &(&self.centers.row(node) * rg)) / (1.0 + rg);
        let step = &y - &x;
        self.value(node, y.view()) + step.dot(&step) / (2.0 * r)
    }

    /// Consensus minimizer of `Σ_i f_i`: the mean center, stacked `m` times.
    pub fn consensus_minimizer(&self) -> Array2<f64> {
        let mean = self.centers.mean_axis(Axis(0)).expect("at least one node");
        let mut out = Array2::zeros(self.centers.raw_dim());
        out.outer_iter_mut().for_each(|mut row| row.assign(&mean));
        out
    }
}

impl DualOracle for QuadraticOracle {
    fn nodes(&self) -> usize {
        self.centers.nrows()
    }

    fn dim(&self) -> usize {
        self.centers.ncols()
    }

    fn strong_convexity(&self) -> f64 {
        self.gamma
    }

    fn conj_value(&self, node: usize, z: ArrayView1<'_, f64>) -> f64 {
        z.dot(&self.centers.row(node)) + z.dot(&z) / (2.0 * self.gamma)
    }

    fn grad_conj(&self, node: usize, z: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>) {
        out.assign(&self.centers.row(node));
        out.scaled_add(1.0 / self.gamma, &z);
    }
}

/// A convex primal known through its proximal operator on a convex set `S`.
pub trait ProxPrimal: Sync {
    fn nodes(&self) -> usize;

    fn dim(&self) -> usize;

    fn value(&self, node: usize, x: ArrayView1<'_, f64>) -> f64;

    /// `argmin_{x ∈ S} f_i(x) + ‖x − v‖²/(2 step)`.
    fn prox(&self, node: usize, v: ArrayView1<'_, f64>, step: f64, out: ArrayViewMut1<'_, f64>);
}

/// Strongly convex regularization `f_i + (γ/2)‖x‖²` of a merely convex primal,
/// exposed as a [`DualOracle`].
///
/// The conjugate gradient is the maximizer of `⟨z, x⟩ − f_i(x) − (γ/2)‖x‖²`,
/// which is `prox_{f_i/γ}(z/γ)`.
#[derive(Debug, Clone)]
pub struct Tikhonov<P> {
    primal: P,
    gamma: f64,
}

impl<P: ProxPrimal> Tikhonov<P> {
    pub fn new(primal: P, gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(Self { primal, gamma })
    }

    /// Regularization sized for accuracy `eps`: `γ = √eps`.
    pub fn for_accuracy(primal: P, eps: f64) -> Result<Self> {
        check_positive("eps", eps)?;
        Self::new(primal, eps.sqrt())
    }

    pub fn primal(&self) -> &P {
        &self.primal
    }

    fn maximizer(&self, node: usize, z: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut x = Array1::zeros(z.len());
        self.primal.prox(node, (&z / self.gamma).view(), 1.0 / self.gamma, x.view_mut());
        x
    }
}

impl<P: ProxPrimal> DualOracle for Tikhonov<P> {
    fn nodes(&self) -> usize {
        self.primal.nodes()
    }

    fn dim(&self) -> usize {
        self.primal.dim()
    }

    fn strong_convexity(&self) -> f64 {
        self.gamma
    }

    fn conj_value(&self, node: usize, z: ArrayView1<'_, f64>) -> f64 {
        let x = self.maximizer(node, z);
        z.dot(&x) - self.primal.value(node, x.view()) - 0.5 * self.gamma * x.dot(&x)
    }

    fn grad_conj(&self, node: usize, z: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>) {
        out.assign(&self.maximizer(node, z));
    }
}

/// `f_i(x) = ⟨c_i, x⟩` restricted to the probability simplex: convex, not
/// strongly convex, and with a cheap prox (a shifted simplex projection).
#[derive(Debug, Clone)]
pub struct LinearOnSimplex {
    costs: Array2<f64>,
}

impl LinearOnSimplex {
    pub fn new(costs: Array2<f64>) -> Result<Self> {
        if costs.ncols() < 1 || costs.nrows() < 1 {
            return Err(AdomError::ShapeMismatch { expected: (1, 1), got: costs.dim() });
        }
        Ok(Self { costs })
    }
}

impl ProxPrimal for LinearOnSimplex {
    fn nodes(&self) -> usize {
        self.costs.nrows()
    }

    fn dim(&self) -> usize {
        self.costs.ncols()
    }

    fn value(&self, node: usize, x: ArrayView1<'_, f64>) -> f64 {
        self.costs.row(node).dot(&x)
    }

    fn prox(&self, node: usize, v: ArrayView1<'_, f64>, step: f64, mut out: ArrayViewMut1<'_, f64>) {
        let shifted = &v - &(&self.costs.row(node) * step);
        out.assign(&project_to_simplex(shifted.view()).mass());
    }
}
