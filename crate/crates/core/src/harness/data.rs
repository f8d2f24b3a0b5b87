//! Input measures: truncated Gaussians on a 1-D grid and MNIST digits.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, Result};
use crate::entot::{cost_matrix, floor_histogram, CostMatrix, Histogram};

/// A discretized Gaussian `exp(−(t − mean)²/(2 std²))` on `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean: f64,
    pub std: f64,
    pub grid: Array1<f64>,
}

impl GaussianSpec {
    pub fn new(mean: f64, std: f64, grid: Array1<f64>) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) || !mean.is_finite() {
            return Err(HarnessError::invalid("std", std, "must be positive and finite"));
        }
        if grid.len() < 2 {
            return Err(HarnessError::invalid("d", grid.len(), "the grid needs at least 2 points"));
        }
        Ok(Self { mean, std, grid })
    }
}

/// `d` equally spaced points on `[0, 1]`.
pub fn unit_grid(d: usize) -> Array1<f64> {
    Array1::linspace(0.0, 1.0, d)
}

/// Normalized density on the grid, then δ-floored (`delta = 0` skips the floor).
pub fn gen_truncated_gaussian(spec: &GaussianSpec, delta: f64) -> Result<Histogram> {
    if spec.grid.len() < 2 || spec.std.is_nan() || spec.std <= 0.0 {
        return Err(HarnessError::invalid("d", spec.grid.len(), "degenerate grid"));
    }
    let w = spec.grid.mapv(|t| (-(t - spec.mean).powi(2) / (2.0 * spec.std * spec.std)).exp());
    let h = Histogram::from_weights(w)?;
    if delta > 0.0 {
        Ok(floor_histogram(&h, delta)?)
    } else {
        Ok(h)
    }
}

/// The Gaussian with averaged mean and averaged std.
pub fn analytic_barycenter(specs: &[GaussianSpec], delta: f64) -> Result<Histogram> {
    let first = specs.first().ok_or_else(|| HarnessError::invalid("m", 0, "no Gaussians given"))?;
    if specs.iter().any(|s| s.grid != first.grid) {
        return Err(HarnessError::invalid("grid", "mixed", "all Gaussians must share one grid"));
    }
    let n = specs.len() as f64;
    let mean = specs.iter().map(|s| s.mean).sum::<f64>() / n;
    let std = specs.iter().map(|s| s.std).sum::<f64>() / n;
    gen_truncated_gaussian(&GaussianSpec::new(mean, std, first.grid.clone())?, delta)
}

/// Seeded draws `mean ~ U[mean_range]`, `std ~ U[std_range]` on the unit grid.
pub fn draw_gaussians(
    m: usize,
    d: usize,
    mean_range: (f64, f64),
    std_range: (f64, f64),
    seed: u64,
) -> Result<Vec<GaussianSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep the data stream apart from the schedule's per-epoch streams
    rng.set_stream(u64::MAX);
    let grid = unit_grid(d);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    (0..m)
        .map(|_| {
            let mean = draw(&mut rng, mean_range);
            let std = draw(&mut rng, std_range);
            GaussianSpec::new(mean, std, grid.clone())
        })
        .collect()
}

/// Histograms, ground cost and (when known) the true barycenter.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub histograms: Vec<Histogram>,
    pub cost: CostMatrix,
    pub barycenter: Option<Histogram>,
}

/// Gaussian inputs on the unit grid with the normalized squared-distance cost.
pub fn gaussian_dataset(specs: &[GaussianSpec], delta: f64) -> Result<Dataset> {
    let first = specs.first().ok_or_else(|| HarnessError::invalid("m", 0, "no Gaussians given"))?;
    let histograms = specs.iter().map(|s| gen_truncated_gaussian(s, delta)).collect::<Result<Vec<_>>>()?;
    let cost = cost_matrix(first.grid.view().insert_axis(ndarray::Axis(1)), true)?;
    let barycenter = Some(analytic_barycenter(specs, delta)?);
    Ok(Dataset { histograms, cost, barycenter })
}

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| HarnessError::format(path, offset, "file truncated"))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// Raw IDX3 images as `(count, rows, cols, pixels)`.
fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, usize)> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(HarnessError::format(path, 0, &format!("bad magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let n = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    let end = 16 + n * rows * cols;
    if bytes.len() < end {
        return Err(HarnessError::format(path, bytes.len(), &format!("file truncated, {end} bytes expected")));
    }
    Ok((n, rows, cols, 16))
}

fn parse_labels(bytes: &[u8], path: &Path) -> Result<usize> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(HarnessError::format(path, 0, &format!("bad magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let n = read_u32(bytes, 4, path)? as usize;
    if bytes.len() < 8 + n {
        return Err(HarnessError::format(path, bytes.len(), &format!("file truncated, {} bytes expected", 8 + n)));
    }
    Ok(n)
}

/// Block-sums an image into `grid × grid` cells and normalizes it; blank
/// images become uniform. The result is δ-floored.
pub fn image_histogram(pixels: &[u8], rows: usize, cols: usize, grid: usize, delta: f64) -> Result<Histogram> {
    if grid == 0 || !rows.is_multiple_of(grid) || !cols.is_multiple_of(grid) {
        return Err(HarnessError::invalid("grid", grid, &format!("must divide the {rows}x{cols} image size")));
    }
    let (bh, bw) = (rows / grid, cols / grid);
    let mut w = Array1::<f64>::zeros(grid * grid);
    for r in 0..rows {
        for c in 0..cols {
            w[(r / bh) * grid + c / bw] += pixels[r * cols + c] as f64;
        }
    }
    let h = if w.sum() > 0.0 { Histogram::from_weights(w)? } else { Histogram::uniform(grid * grid) };
    Ok(floor_histogram(&h, delta)?)
}

/// Normalized squared-distance cost between the cells of a `grid × grid` image.
pub fn pixel_cost(grid: usize) -> Result<CostMatrix> {
    let pts = Array2::from_shape_fn((grid * grid, 2), |(k, c)| if c == 0 { (k / grid) as f64 } else { (k % grid) as f64 });
    Ok(cost_matrix(pts.view(), true)?)
}

/// The first `count` images labelled `digit`, as floored `grid²`-histograms
/// with their pixel cost.
pub fn load_mnist(images: &Path, labels: &Path, digit: u8, count: usize, grid: usize, delta: f64) -> Result<Dataset> {
    let image_bytes = read_file(images)?;
    let label_bytes = read_file(labels)?;
    let (n, rows, cols, start) = parse_images(&image_bytes, images)?;
    let n_labels = parse_labels(&label_bytes, labels)?;
    if n_labels != n {
        return Err(HarnessError::format(labels, 4, &format!("{n_labels} labels for {n} images")));
    }
    let size = rows * cols;
    let mut histograms = Vec::with_capacity(count);
    for (k, &label) in label_bytes[8..8 + n].iter().enumerate() {
        if histograms.len() == count {
            break;
        }
        if label == digit {
            let pixels = &image_bytes[start + k * size..start + (k + 1) * size];
            histograms.push(image_histogram(pixels, rows, cols, grid, delta)?);
        }
    }
    if histograms.len() < count {
        return Err(HarnessError::NotEnoughImages { digit, found: histograms.len(), wanted: count });
    }
    Ok(Dataset { histograms, cost: pixel_cost(grid)?, barycenter: None })
}
