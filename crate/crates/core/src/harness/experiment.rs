//! One experiment from config to files on disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetKind, ExperimentConfig};
use super::data::{draw_gaussians, gaussian_dataset, load_mnist, Dataset};
use super::{HarnessError, Result};
use crate::adom::{consensus_metric, derive_params, run_observed, AdomParams, DualOracle, SmoothedOracle, SolverState};
use crate::entot::{
    cost_matrix, dual_grad, dual_value, exact_ot, floor_histogram, k_bound, CostMatrix, Histogram, WbDualOracle,
};
use crate::netgraph::{spectral_bounds, SpectralBounds};

pub const CSV_HEADER: &str = "iteration,objective_gap,consensus,wall_time";

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub objective_gap: f64,
    pub consensus: f64,
    /// Seconds since the solver started, only when timing is enabled.
    pub wall_time: Option<f64>,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let wall = self.wall_time.map(|t| t.to_string()).unwrap_or_default();
        format!("{},{},{},{}", self.iteration, self.objective_gap, self.consensus, wall)
    }
}

/// What the `objective_gap` column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `(1/m)(Σ W(q_i, x_i) − Σ W(q_i, p*))` against the analytic barycenter.
    GapToBarycenter,
    /// `(1/m) Σ W(q_i, x_i)`; no ground truth exists.
    MeanDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub spectral_bounds: SpectralBounds,
    pub params: AdomParams,
    pub objective: ObjectiveKind,
    /// `(1/m) Σ W(q_i, p*)` when `p*` is known.
    pub reference_objective: Option<f64>,
    pub k_squared: f64,
    /// `2γ ln d + r m K²/(4(1 + rγ))`.
    pub entropic_floor: f64,
    pub git_describe: String,
    pub completed: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    /// Node outputs `x^n` at the last iteration, one row per node.
    pub final_x: Array2<f64>,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match cfg.dataset {
        DatasetKind::Gaussians => {
            let specs = draw_gaussians(cfg.m, cfg.d, (cfg.mean_min, cfg.mean_max), (cfg.std_min, cfg.std_max), cfg.seed)?;
            gaussian_dataset(&specs, cfg.delta)
        }
        DatasetKind::Mnist => {
            let missing = || HarnessError::invalid("mnist_images", "", "mnist_images and mnist_labels are required");
            let images = cfg.mnist_images.as_deref().ok_or_else(missing)?;
            let labels = cfg.mnist_labels.as_deref().ok_or_else(missing)?;
            load_mnist(images, labels, cfg.digit, cfg.m, cfg.grid, cfg.delta)
        }
    }
}

fn mean_distance(qs: &[Histogram], x: &Array2<f64>, cost: &CostMatrix) -> Result<f64> {
    let total: f64 = qs
        .par_iter()
        .enumerate()
        .map(|(i, q)| exact_ot(q, &Histogram::clipped(x.row(i)), cost))
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    Ok(total / qs.len() as f64)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_histograms(path: &Path, x: &Array2<f64>) -> Result<()> {
    let io = |e| HarnessError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Runs Modified ADOM on the configured barycenter problem and writes
/// `metrics.csv`, `manifest.json` and `histograms.csv` to `cfg.output`.
///
/// Metric rows are flushed as they are produced, so a diverging run leaves
/// its partial CSV behind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let data = build_dataset(cfg)?;
    let schedule = cfg.schedule()?;
    let bounds = spectral_bounds(&schedule, cfg.n_iters)?;
    let params = derive_params(cfg.r, cfg.gamma, bounds)?;
    let k_squared = k_bound(&data.cost, cfg.gamma, cfg.delta, None)?;
    let d = data.cost.dim();
    let oracle = WbDualOracle::new(&data.histograms, data.cost.clone(), cfg.gamma, cfg.delta)?;

    let (objective, reference_objective) = match &data.barycenter {
        Some(p) => {
            let stacked = Array2::from_shape_fn((cfg.m, d), |(_, l)| p.mass()[l]);
            (ObjectiveKind::GapToBarycenter, Some(mean_distance(&data.histograms, &stacked, &data.cost)?))
        }
        None => (ObjectiveKind::MeanDistance, None),
    };
    let rg1 = 1.0 + cfg.r * cfg.gamma;
    let mut manifest = Manifest {
        config: cfg.clone(),
        spectral_bounds: bounds,
        params,
        objective,
        reference_objective,
        k_squared,
        entropic_floor: 2.0 * cfg.gamma * (d as f64).ln() + cfg.r * cfg.m as f64 * k_squared / (4.0 * rg1),
        git_describe: env!("MADOM_GIT_DESCRIBE").to_string(),
        completed: false,
    };

    let dir = cfg.output.clone();
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    write_manifest(&dir, &manifest)?;
    let csv_path = dir.join("metrics.csv");
    let io = |e| HarnessError::io(&csv_path, e);
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(io)?);
    writeln!(csv, "{CSV_HEADER}").map_err(io)?;

    let smoothed = SmoothedOracle::new(&oracle, cfg.r)?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut final_x = Array2::zeros((cfg.m, d));
    let mut failure = None;
    let outcome = run_observed(
        &schedule,
        &smoothed,
        &params.steps,
        SolverState::zeros(cfg.m, d),
        cfg.n_iters,
        |n, x, _| {
            if !n.is_multiple_of(cfg.record_every) && n + 1 != cfg.n_iters {
                return ControlFlow::Continue(());
            }
            let wall_time = cfg.timing.then(|| start.elapsed().as_secs_f64());
            let row = mean_distance(&data.histograms, x, &data.cost).and_then(|value| {
                Ok(MetricsRow {
                    iteration: n,
                    objective_gap: value - reference_objective.unwrap_or(0.0),
                    consensus: consensus_metric(x.view())?,
                    wall_time,
                })
            });
            let written = row.and_then(|row| {
                writeln!(csv, "{}", row.to_csv_line()).and_then(|_| csv.flush()).map_err(io)?;
                Ok(row)
            });
            match written {
                Ok(row) => {
                    rows.push(row);
                    final_x.assign(x);
                    ControlFlow::Continue(())
                }
                Err(e) => {
                    failure = Some(e);
                    ControlFlow::Break(())
                }
            }
        },
    );
    drop(csv);
    if let Err(f) = outcome {
        return Err(HarnessError::Solver { source: f.error, rows_written: rows.len() });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    write_histograms(&dir.join("histograms.csv"), &final_x)?;
    manifest.completed = true;
    write_manifest(&dir, &manifest)?;
    Ok(ExperimentOutput { rows, final_x, manifest, output_dir: dir })
}

/// Deviations found by [`oracle_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheckReport {
    /// `‖fd − ∇‖∞ / ‖∇‖∞` with central differences of the dual value.
    pub fd_max_rel_error: f64,
    /// `|Σ ∇ − 1|`.
    pub simplex_sum_error: f64,
    pub min_entry: f64,
    /// `‖·‖∞` gap between the node oracle and the log-domain gradient.
    pub oracle_deviation: f64,
}

/// Checks the dual gradient on a seeded random instance of size `d`.
pub fn oracle_check(d: usize, gamma: f64, seed: u64) -> Result<OracleCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = Array2::from_shape_fn((d, 2), |_| rng.random::<f64>());
    let cost = cost_matrix(pts.view(), true)?;
    let delta = 1e-6;
    let q = floor_histogram(&Histogram::from_weights(Array1::from_shape_fn(d, |_| rng.random::<f64>()))?, delta)?;
    let z = Array1::from_shape_fn(d, |_| rng.random::<f64>() - 0.5);

    let grad = dual_grad(&q, &cost, gamma, z.view())?;
    let h = 1e-4 * gamma;
    let mut worst: f64 = 0.0;
    let mut zp = z.clone();
    for l in 0..d {
        zp[l] = z[l] + h;
        let up = dual_value(&q, &cost, gamma, zp.view())?;
        zp[l] = z[l] - h;
        let down = dual_value(&q, &cost, gamma, zp.view())?;
        zp[l] = z[l];
        worst = worst.max(((up - down) / (2.0 * h) - grad.mass()[l]).abs());
    }
    let scale = grad.mass().iter().copied().fold(0.0, f64::max);

    let oracle = WbDualOracle::new(std::slice::from_ref(&q), cost, gamma, delta)?;
    let mut node = Array1::zeros(d);
    oracle.grad_conj(0, z.view(), node.view_mut());
    let oracle_deviation = (&node - &grad.mass()).iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(OracleCheckReport {
        fd_max_rel_error: worst / scale,
        simplex_sum_error: (grad.mass().sum() - 1.0).abs(),
        min_entry: grad.min(),
        oracle_deviation,
    })
}
