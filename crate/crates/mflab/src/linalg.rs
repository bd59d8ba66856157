//! Small dense-matrix helpers shared by the spectral and filter modules.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Largest absolute entry; 0 for an empty matrix.
pub fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Largest absolute asymmetry `|a_ij - a_ji|`.
pub fn symmetry_defect(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_square(m: &Array2<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Requires `m` symmetric within `rel_tol` relative to its largest entry.
pub fn check_symmetric(m: &Array2<f64>, rel_tol: f64) -> Result<usize> {
    let n = check_square(m)?;
    let scale = max_abs(m).max(1e-300);
    let defect = symmetry_defect(m);
    if defect > rel_tol * scale {
        return Err(Error::invalid(format!(
            "matrix asymmetric: defect {defect:.3e} exceeds {rel_tol:.1e} relative"
        )));
    }
    Ok(n)
}

/// Frobenius norm.
pub fn fro_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Infinity norm (max absolute row sum).
pub fn inf_norm(m: &Array2<f64>) -> f64 {
    let mut worst = 0.0f64;
    for row in m.rows() {
        worst = worst.max(row.iter().map(|x| x.abs()).sum());
    }
    worst
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Gauss-Jordan inverse for the tiny matrices used in subspace alignment.
fn invert_small(m: &Array2<f64>) -> Option<Array2<f64>> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if a[(r, col)].abs() > a[(pivot, col)].abs() {
                pivot = r;
            }
        }
        if a[(pivot, col)].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap((pivot, j), (col, j));
                inv.swap((pivot, j), (col, j));
            }
        }
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[(r, col)];
                if f != 0.0 {
                    for j in 0..n {
                        a[(r, j)] -= f * a[(col, j)];
                        inv[(r, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Orthogonal polar factor of a small square matrix by Newton iteration,
/// `X <- (X + X^-T) / 2`. For a nonsingular `m` this converges to the nearest
/// orthogonal matrix, which is the Procrustes rotation when `m = U^T W`.
pub fn polar_orthogonal(m: &Array2<f64>) -> Result<Array2<f64>> {
    let n = check_square(m)?;
    let mut x = m.clone();
    for _ in 0..60 {
        let inv_t = invert_small(&x)
            .ok_or_else(|| Error::DegenerateCase("singular matrix in polar iteration".into()))?
            .reversed_axes();
        let next = (&x + &inv_t) * 0.5;
        let delta = max_abs(&(&next - &x));
        x = next;
        if delta < 1e-14 {
            break;
        }
    }
    // orthogonality check
    let gram = x.t().dot(&x);
    let defect = max_abs(&(&gram - &Array2::<f64>::eye(n)));
    if defect > 1e-10 {
        return Err(Error::NumericalFailure(format!(
            "polar iteration failed to orthogonalize (defect {defect:.3e})"
        )));
    }
    Ok(x)
}

/// `m * v` with a fixed accumulation order.
pub fn matvec(m: &Array2<f64>, v: &Array1<f64>) -> Array1<f64> {
    m.dot(v)
}
