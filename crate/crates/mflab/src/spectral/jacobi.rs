//! Cyclic Jacobi eigendecomposition for dense symmetric matrices.

use ndarray::Array2;

use super::{InnerProduct, Spectrum};
use crate::error::{Error, Result};
use crate::linalg;

const MAX_SWEEPS: usize = 100;
const MAX_N: usize = 4096;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps run in a fixed row-major order over the upper triangle and stop when
/// the off-diagonal Frobenius norm drops below `tol * ||matrix||_F`, so the
/// result is deterministic. Eigenvalues come back ascending with eigenvectors
/// orthonormal under the standard inner product.
pub fn eig_sym(matrix: &Array2<f64>, tol: f64) -> Result<Spectrum> {
    let n = linalg::check_symmetric(matrix, 1e-12)?;
    if n > MAX_N {
        return Err(Error::invalid(format!("matrix order {n} exceeds {MAX_N}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }

    // working copy, row-major; only the upper triangle + diagonal is kept current
    let mut a: Vec<f64> = matrix.iter().copied().collect();
    // accumulated rotations, stored transposed: row i of vt is eigenvector i
    let mut vt = vec![0.0f64; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let fro = linalg::fro_norm(matrix);
    let target = tol * fro;

    let mut converged = fro == 0.0;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let x = a[p * n + q];
                off += 2.0 * x * x;
            }
        }
        if off.sqrt() <= target {
            converged = true;
            break;
        }

        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    // avoid overflow in theta^2
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                // rotate the upper triangle in three index ranges
                for j in 0..p {
                    let g = a[j * n + p];
                    let h = a[j * n + q];
                    a[j * n + p] = g - s * (h + g * tau);
                    a[j * n + q] = h + s * (g - h * tau);
                }
                for j in (p + 1)..q {
                    let g = a[p * n + j];
                    let h = a[j * n + q];
                    a[p * n + j] = g - s * (h + g * tau);
                    a[j * n + q] = h + s * (g - h * tau);
                }
                for j in (q + 1)..n {
                    let g = a[p * n + j];
                    let h = a[q * n + j];
                    a[p * n + j] = g - s * (h + g * tau);
                    a[q * n + j] = h + s * (g - h * tau);
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;

                // eigenvector rows p, q of vt
                let (head, tail) = vt.split_at_mut(q * n);
                let row_p = &mut head[p * n..p * n + n];
                let row_q = &mut tail[..n];
                for (gp, gq) in row_p.iter_mut().zip(row_q.iter_mut()) {
                    let g = *gp;
                    let h = *gq;
                    *gp = g - s * (h + g * tau);
                    *gq = h + s * (g - h * tau);
                }
            }
        }
    }

    if !converged {
        // re-check after the final sweep
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let x = a[p * n + q];
                off += 2.0 * x * x;
            }
        }
        if off.sqrt() > target {
            return Err(Error::NumericalFailure(format!(
                "jacobi did not converge in {MAX_SWEEPS} sweeps (off-diagonal {:.3e})",
                off.sqrt()
            )));
        }
    }

    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    Ok(Spectrum::from_transposed_vectors(
        eigenvalues,
        vt,
        n,
        InnerProduct::Standard,
    ))
}
