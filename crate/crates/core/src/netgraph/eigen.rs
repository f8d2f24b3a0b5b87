//! Cyclic Jacobi eigenvalue iteration for small dense symmetric matrices.

use ndarray::ArrayView2;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, ascending.
///
/// Only the upper triangle is trusted to match the lower one; the caller is
/// responsible for symmetry. Converges quadratically once the off-diagonal
/// mass is small, and every rotation keeps the iterate exactly symmetric.
pub fn symmetric_eigenvalues(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut w: Vec<f64> = a.iter().copied().collect();
    let at = |w: &[f64], i: usize, j: usize| w[i * n + j];

    let scale = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| at(&w, i, j).powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = at(&w, p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = at(&w, p, p);
                let aqq = at(&w, q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                w[p * n + p] = app - t * apq;
                w[q * n + q] = aqq + t * apq;
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = at(&w, r, p);
                    let arq = at(&w, r, q);
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    w[r * n + p] = new_rp;
                    w[p * n + r] = new_rp;
                    w[r * n + q] = new_rq;
                    w[q * n + r] = new_rq;
                }
            }
        }
    }

    let mut ev: Vec<f64> = (0..n).map(|i| at(&w, i, i)).collect();
    ev.sort_by(f64::total_cmp);
    ev
}
