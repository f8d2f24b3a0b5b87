use std::fmt;
use std::ops::ControlFlow;

use ndarray::{Array2, ArrayView2, Axis, Zip};

use super::{AdomError, AdomParams, DualOracle, Result, SmoothedOracle, StackedGradient, StepSizes};
use crate::netgraph::{Laplacian, NetworkSchedule};

/// Iterates of one solver run. `z`, `z_f` and `z_g` stay in `R⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: Array2<f64>,
    pub z_f: Array2<f64>,
    /// `z_g` of the most recent step (zero before the first one).
    pub z_g: Array2<f64>,
    pub momentum: Array2<f64>,
    /// Number of completed steps.
    pub iteration: usize,
}

impl SolverState {
    /// `z⁰ = z_f⁰ = m⁰ = 0`.
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        let zero = Array2::zeros((nodes, dim));
        Self { z: zero.clone(), z_f: zero.clone(), z_g: zero.clone(), momentum: zero, iteration: 0 }
    }

    /// Arbitrary start for the baseline solver: `z⁰ ∈ R⊥`, any `m⁰`, `z_f⁰ = z⁰`.
    pub fn from_initial(z0: Array2<f64>, m0: Array2<f64>) -> Result<Self> {
        if z0.dim() != m0.dim() {
            return Err(AdomError::ShapeMismatch { expected: z0.dim(), got: m0.dim() });
        }
        let drift = sum_of_rows_norm(z0.view());
        let scale = z0.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        if drift > 1e-12 * scale {
            return Err(AdomError::NotInRPerp(drift));
        }
        Ok(Self { z_f: z0.clone(), z_g: z0.clone(), z: z0, momentum: m0, iteration: 0 })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.z.dim()
    }
}

/// `‖Σ_i x_i‖₂`, the distance of a stack's row sum from zero.
pub fn sum_of_rows_norm(x: ArrayView2<'_, f64>) -> f64 {
    let s = x.sum_axis(Axis(0));
    s.dot(&s).sqrt()
}

/// Mean pairwise squared distance between node rows,
/// `(2/(m(m−1))) Σ_{i<j} ‖x_i − x_j‖²`.
pub fn consensus_metric(x: ArrayView2<'_, f64>) -> Result<f64> {
    let m = x.nrows();
    if m < 2 {
        return Err(AdomError::TooFewNodes(m));
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            total += Zip::from(x.row(i)).and(x.row(j)).fold(0.0, |acc, a, b| acc + (a - b) * (a - b));
        }
    }
    Ok(2.0 * total / (m * (m - 1)) as f64)
}

fn ensure_finite(a: &Array2<f64>, iteration: usize, iterate: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AdomError::Diverged { iteration, iterate })
    }
}

/// One synchronous round. Returns the output `x = ∇H*(z_g)` of this round.
///
/// The oracle is called exactly once and the Laplacian applied exactly twice.
/// On error the state is left untouched.
pub fn adom_step<G: StackedGradient + ?Sized>(
    state: &mut SolverState,
    lap: &Laplacian,
    steps: &StepSizes,
    grad: &G,
) -> Result<Array2<f64>> {
    let shape = state.shape();
    if lap.nodes() != shape.0 || grad.nodes() != shape.0 || grad.dim() != shape.1 {
        return Err(AdomError::ShapeMismatch { expected: shape, got: (lap.nodes(), grad.dim()) });
    }
    let n = state.iteration;
    let StepSizes { alpha, eta, theta, sigma, tau } = *steps;

    let z_g = &state.z * tau + &state.z_f * (1.0 - tau);
    let mut g = Array2::zeros(shape);
    grad.eval(z_g.view(), g.view_mut());
    ensure_finite(&g, n, "∇H*(z_g)")?;

    let shifted = &state.momentum - &(&g * eta);
    let mut delta = lap.apply(shifted.view())?;
    delta *= sigma;
    let momentum = shifted - &delta;
    let z = &state.z + &((&z_g - &state.z) * (eta * alpha)) + &delta;
    let lg = lap.apply(g.view())?;
    let z_f = &z_g - &(lg * theta);

    ensure_finite(&z, n, "z")?;
    ensure_finite(&z_f, n, "z_f")?;
    ensure_finite(&momentum, n, "m")?;

    state.z = z;
    state.z_f = z_f;
    state.z_g = z_g;
    state.momentum = momentum;
    state.iteration += 1;
    Ok(g)
}

/// A failed run together with whatever was produced before the failure.
#[derive(Debug, Clone)]
pub struct RunFailure<T> {
    pub error: AdomError,
    pub partial: Box<T>,
}

impl<T> fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl<T: fmt::Debug> std::error::Error for RunFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs `n_iters` rounds from `state`, handing every round's output to
/// `observe` (which may stop the run early).
///
/// The Laplacian is rebuilt only when the schedule's epoch changes.
pub fn run_observed<G, F>(
    schedule: &NetworkSchedule,
    grad: &G,
    steps: &StepSizes,
    mut state: SolverState,
    n_iters: usize,
    mut observe: F,
) -> std::result::Result<SolverState, RunFailure<SolverState>>
where
    G: StackedGradient + ?Sized,
    F: FnMut(usize, &Array2<f64>, &SolverState) -> ControlFlow<()>,
{
    let fail = |error, partial| Err(RunFailure { error, partial: Box::new(partial) });
    if n_iters == 0 {
        return fail(AdomError::ZeroIterations, state);
    }
    if schedule.nodes() != state.shape().0 {
        let got = (schedule.nodes(), state.shape().1);
        return fail(AdomError::ShapeMismatch { expected: state.shape(), got }, state);
    }
    let start = state.iteration;
    let mut current: Option<(usize, Laplacian)> = None;
    for n in start..start + n_iters {
        let epoch = schedule.epoch(n);
        if current.as_ref().is_none_or(|(e, _)| *e != epoch) {
            current = Some((epoch, schedule.epoch_laplacian(epoch)));
        }
        let lap = &current.as_ref().expect("set above").1;
        match adom_step(&mut state, lap, steps, grad) {
            Ok(x) => {
                if observe(n, &x, &state).is_break() {
                    break;
                }
            }
            Err(error) => return fail(error, state),
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub iteration: usize,
    /// `x^n = ∇H*(z_g^n)`, one row per node.
    pub x: Array2<f64>,
    pub consensus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: SolverState,
    pub oracle_evaluations: usize,
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }
}

fn recorded_run<G: StackedGradient + ?Sized>(
    schedule: &NetworkSchedule,
    grad: &G,
    steps: &StepSizes,
    state: SolverState,
    n_iters: usize,
    record_every: usize,
) -> std::result::Result<Trajectory, RunFailure<Trajectory>> {
    let mut records = Vec::new();
    let mut evaluations = 0;
    if record_every == 0 {
        let partial = Trajectory { records, final_state: state, oracle_evaluations: 0 };
        return Err(RunFailure { error: AdomError::ZeroRecordInterval, partial: Box::new(partial) });
    }
    let start = state.iteration;
    let outcome = run_observed(schedule, grad, steps, state, n_iters, |n, x, _| {
        evaluations += 1;
        let k = n - start;
        if k.is_multiple_of(record_every) || k + 1 == n_iters {
            // m ≥ 2 is guaranteed by the schedule
            let consensus = consensus_metric(x.view()).unwrap_or(0.0);
            records.push(TrajectoryRecord { iteration: n, x: x.clone(), consensus });
        }
        ControlFlow::Continue(())
    });
    match outcome {
        Ok(final_state) => Ok(Trajectory { records, final_state, oracle_evaluations: evaluations }),
        Err(RunFailure { error, partial }) => Err(RunFailure {
            error,
            partial: Box::new(Trajectory { records, final_state: *partial, oracle_evaluations: evaluations }),
        }),
    }
}

/// Modified ADOM from the zero state, recording `x^n` every `record_every`
/// iterations and at the last one.
pub fn run<O: DualOracle>(
    schedule: &NetworkSchedule,
    oracle: &O,
    params: &AdomParams,
    n_iters: usize,
    record_every: usize,
) -> std::result::Result<Trajectory, RunFailure<Trajectory>> {
    let state = SolverState::zeros(oracle.nodes(), oracle.dim());
    let smoothed = match SmoothedOracle::new(oracle, params.r) {
        Ok(s) => s,
        Err(error) => {
            let partial = Trajectory { records: Vec::new(), final_state: state, oracle_evaluations: 0 };
            return Err(RunFailure { error, partial: Box::new(partial) });
        }
    };
    recorded_run(schedule, &smoothed, &params.steps, state, n_iters, record_every)
}

/// Plain ADOM on a caller-supplied `∇H*`, with step sizes usually from
/// [`super::baseline_params`].
pub fn baseline_run<G: StackedGradient + ?Sized>(
    schedule: &NetworkSchedule,
    grad: &G,
    steps: &StepSizes,
    initial: SolverState,
    n_iters: usize,
    record_every: usize,
) -> std::result::Result<Trajectory, RunFailure<Trajectory>> {
    recorded_run(schedule, grad, steps, initial, n_iters, record_every)
}
