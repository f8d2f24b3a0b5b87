//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};

/// Dense two-phase simplex with Bland's rule for `min cᵀx, Ax = b, x ≥ 0`.
/// Returns `None` when infeasible.
pub fn lp_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let (rows, n) = (a.len(), c.len());
    let width = n + rows + 1;
    let mut t = vec![vec![0.0; width]; rows];
    for i in 0..rows {
        let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = s * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = s * b[i];
    }
    let mut basis: Vec<usize> = (n..n + rows).collect();

    // phase 1 objective: sum of artificials, as reduced costs
    let mut obj = vec![0.0; width];
    for row in &t {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[width - 1] -= row[width - 1];
    }
    simplex(&mut t, &mut obj, &mut basis, n + rows);
    if -obj[width - 1] > 1e-9 {
        return None;
    }
    // move zero-level artificials out of the basis where possible
    for i in 0..rows {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut obj, &mut basis, i, j);
            }
        }
    }
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    for i in 0..rows {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        for j in 0..width {
            obj[j] -= cb * t[i][j];
        }
    }
    simplex(&mut t, &mut obj, &mut basis, n);
    Some(-obj[width - 1])
}

fn pivot(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], r: usize, col: usize) {
    let width = obj.len();
    let p = t[r][col];
    for j in 0..width {
        t[r][j] /= p;
    }
    for i in 0..t.len() {
        if i != r {
            let f = t[i][col];
            if f != 0.0 {
                for j in 0..width {
                    t[i][j] -= f * t[r][j];
                }
            }
        }
    }
    let f = obj[col];
    for j in 0..width {
        obj[j] -= f * t[r][j];
    }
    basis[r] = col;
}

/// Bland's rule over columns `0..allowed`.
fn simplex(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], allowed: usize) {
    let width = obj.len();
    loop {
        let Some(col) = (0..allowed).find(|&j| obj[j] < -1e-12) else { return };
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..t.len() {
            if t[i][col] > 1e-12 {
                let ratio = t[i][width - 1] / t[i][col];
                let better = match best {
                    None => true,
                    Some((r, _, bi)) => ratio < r - 1e-15 || (ratio <= r + 1e-15 && basis[i] < bi),
                };
                if better {
                    best = Some((ratio, i, basis[i]));
                }
            }
        }
        let Some((_, r, _)) = best else { panic!("unbounded LP") };
        pivot(t, obj, basis, r, col);
    }
}

/// Optimal transport cost through [`lp_min`].
pub fn lp_transport(p: &[f64], q: &[f64], m: ArrayView2<'_, f64>) -> f64 {
    let d = p.len();
    let c: Vec<f64> = m.iter().copied().collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..d {
        a.push((0..d * d).map(|k| if k / d == i { 1.0 } else { 0.0 }).collect());
        b.push(p[i]);
    }
    for j in 0..d {
        a.push((0..d * d).map(|k| if k % d == j { 1.0 } else { 0.0 }).collect());
        b.push(q[j]);
    }
    lp_min(&c, &a, &b).expect("transport LP is feasible")
}

/// Entropic transport `min ⟨M,X⟩ + γ Σ X ln X` by plain (non-log) matrix
/// scaling, for small well-conditioned instances.
pub fn plain_sinkhorn(p: &[f64], q: &[f64], m: ArrayView2<'_, f64>, gamma: f64) -> f64 {
    let d = p.len();
    let k = m.mapv(|c| (-c / gamma).exp());
    let mut u = vec![1.0; d];
    let mut v = vec![1.0; d];
    for _ in 0..100_000 {
        for i in 0..d {
            u[i] = p[i] / (0..d).map(|j| k[[i, j]] * v[j]).sum::<f64>();
        }
        for j in 0..d {
            v[j] = q[j] / (0..d).map(|i| k[[i, j]] * u[i]).sum::<f64>();
        }
        let err: f64 = (0..d).map(|i| ((0..d).map(|j| u[i] * k[[i, j]] * v[j]).sum::<f64>() - p[i]).abs()).sum();
        if err < 1e-14 {
            break;
        }
    }
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            let x = u[i] * k[[i, j]] * v[j];
            if x > 0.0 {
                total += x * m[[i, j]] + gamma * x * x.ln();
            }
        }
    }
    total
}

/// Central differences of `f` at `z` with step `h`.
pub fn finite_diff(f: impl Fn(&Array1<f64>) -> f64, z: &Array1<f64>, h: f64) -> Array1<f64> {
    let mut zp = z.clone();
    Array1::from_shape_fn(z.len(), |l| {
        zp[l] = z[l] + h;
        let up = f(&zp);
        zp[l] = z[l] - h;
        let down = f(&zp);
        zp[l] = z[l];
        (up - down) / (2.0 * h)
    })
}

/// Least-squares line `y ≈ a + b x`; returns `(slope, intercept, r²)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Ascending eigenvalues of a symmetric matrix via nalgebra.
pub fn eigenvalues(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// IDX3 image file with the given magic.
pub fn write_idx_images(path: &Path, magic: u32, images: &[Vec<u8>], rows: u32, cols: u32) {
    let mut bytes = Vec::new();
    bytes.extend(magic.to_be_bytes());
    bytes.extend((images.len() as u32).to_be_bytes());
    bytes.extend(rows.to_be_bytes());
    bytes.extend(cols.to_be_bytes());
    for img in images {
        bytes.extend(img);
    }
    std::fs::write(path, bytes).unwrap();
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) {
    let mut bytes = Vec::new();
    bytes.extend(0x0000_0801u32.to_be_bytes());
    bytes.extend((labels.len() as u32).to_be_bytes());
    bytes.extend(labels);
    std::fs::write(path, bytes).unwrap();
}
