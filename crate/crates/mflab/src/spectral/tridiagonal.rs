//! Householder tridiagonalization followed by implicit-shift QL.
//!
//! This is the classical EISPACK tred2/tql2 pair, used as the large-matrix
//! backend: the cyclic Jacobi solver is quadratically convergent but needs
//! O(n^3) work per sweep, which is too slow for the n = 1000..2000 graphs the
//! convergence experiments decompose. Both solvers satisfy the same contract
//! and are cross-checked in the tests.

#![allow(clippy::needless_range_loop)] // index loops mirror the textbook algorithm

use super::{InnerProduct, Spectrum};
use crate::error::{Error, Result};
use crate::linalg;
use ndarray::Array2;

const MAX_QL_ITERATIONS: usize = 64;

/// Eigendecomposition of a symmetric matrix via tridiagonal reduction.
///
/// Same output contract as [`super::eig_sym`]: ascending eigenvalues,
/// orthonormal eigenvectors, deterministic.
pub fn eig_sym_tridiagonal(matrix: &Array2<f64>) -> Result<Spectrum> {
    let n = linalg::check_symmetric(matrix, 1e-12)?;
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }

    // `vt` holds the working matrix transposed: vt[c * n + r] is entry (r, c).
    // The input is symmetric so the transposed copy equals the original; the
    // layout makes the hot inner loops (which vary the row index) contiguous.
    let mut vt: Vec<f64> = matrix.iter().copied().collect();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];

    tred2(&mut vt, &mut d, &mut e, n);
    tql2(&mut vt, &mut d, &mut e, n)?;
    sort_ascending(&mut vt, &mut d, n);

    Ok(Spectrum::from_transposed_vectors(
        d,
        vt,
        n,
        InnerProduct::Standard,
    ))
}

#[inline]
fn at(vt: &[f64], n: usize, r: usize, c: usize) -> f64 {
    vt[c * n + r]
}

#[inline]
fn set(vt: &mut [f64], n: usize, r: usize, c: usize, x: f64) {
    vt[c * n + r] = x;
}

/// Householder reduction to symmetric tridiagonal form, accumulating the
/// orthogonal transform in `vt`.
fn tred2(vt: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for j in 0..n {
        d[j] = at(vt, n, n - 1, j);
    }

    for i in (1..n).rev() {
        let mut scale = 0.0f64;
        let mut h = 0.0f64;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = at(vt, n, i - 1, j);
                set(vt, n, i, j, 0.0);
                set(vt, n, j, i, 0.0);
            }
        } else {
            // build the Householder vector in d[0..i]
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // apply the similarity transform to the leading block
            for j in 0..i {
                f = d[j];
                set(vt, n, j, i, f);
                g = e[j] + at(vt, n, j, j) * f;
                let col_j = &vt[j * n..j * n + i];
                for k in (j + 1)..i {
                    g += col_j[k] * d[k];
                    e[k] += col_j[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col_j = &mut vt[j * n..j * n + i];
                for k in j..i {
                    col_j[k] -= f * e[k] + g * d[k];
                }
                d[j] = at(vt, n, i - 1, j);
                set(vt, n, i, j, 0.0);
            }
        }
        d[i] = h;
    }

    // accumulate transformations
    for i in 0..(n - 1) {
        set(vt, n, n - 1, i, at(vt, n, i, i));
        set(vt, n, i, i, 1.0);
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = at(vt, n, k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = 0.0f64;
                {
                    let col_next = &vt[(i + 1) * n..(i + 1) * n + i + 1];
                    let col_j = &vt[j * n..j * n + i + 1];
                    for k in 0..=i {
                        g += col_next[k] * col_j[k];
                    }
                }
                let col_j = &mut vt[j * n..j * n + i + 1];
                for k in 0..=i {
                    col_j[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            set(vt, n, k, i + 1, 0.0);
        }
    }
    for j in 0..n {
        d[j] = at(vt, n, n - 1, j);
        set(vt, n, n - 1, j, 0.0);
    }
    set(vt, n, n - 1, n - 1, 1.0);
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal (d, e), rotating `vt` along.
fn tql2(vt: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = 2.0f64.powi(-52);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m >= n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NumericalFailure(format!(
                        "ql iteration failed to converge for eigenvalue {l}"
                    )));
                }

                // implicit shift from the top 2x2
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // QL chase from m-1 down to l
                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // rotate eigenvector rows i and i+1 of vt
                    let (head, tail) = vt.split_at_mut((i + 1) * n);
                    let row_i = &mut head[i * n..(i + 1) * n];
                    let row_j = &mut tail[..n];
                    for (a, b) in row_i.iter_mut().zip(row_j.iter_mut()) {
                        let h = *b;
                        *b = s * *a + c * h;
                        *a = c * *a - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Selection sort ascending, swapping eigenvector rows of `vt` along.
fn sort_ascending(vt: &mut [f64], d: &mut [f64], n: usize) {
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        for j in (i + 1)..n {
            if d[j] < d[k] {
                k = j;
            }
        }
        if k != i {
            d.swap(i, k);
            for col in 0..n {
                vt.swap(i * n + col, k * n + col);
            }
        }
    }
}
