//! Symmetric eigendecomposition and L2(Gn) spectral geometry.
//!
//! The L2(Gn) inner product carries the 1/n empirical-measure factor, which is
//! what makes sampled eigenfunctions comparable to their manifold
//! counterparts. Eigenvectors therefore exist in two normalizations: standard
//! (unit Euclidean norm) straight out of the solvers, and gn (unit 1/n-norm)
//! after [`gn_normalize`].

mod jacobi;
mod tridiagonal;

use std::io::Write;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use jacobi::eig_sym;
pub use tridiagonal::eig_sym_tridiagonal;

use crate::error::{Error, Result};
use crate::graph::{GraphSignal, PointCloud};
use crate::linalg;
use crate::manifold::AnalyticSpectrum;
use crate::report::fmt_f64;

/// Which inner product the eigenvectors are orthonormal under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerProduct {
    Standard,
    /// The L2(Gn) inner product with the 1/n factor.
    Gn,
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
    pub inner_product: InnerProduct,
}

impl Spectrum {
    /// Assembles a spectrum from a flat transposed eigenvector buffer
    /// (row i of `vt` is eigenvector i), sorting ascending.
    pub(crate) fn from_transposed_vectors(
        eigenvalues: Vec<f64>,
        mut vt: Vec<f64>,
        n: usize,
        inner_product: InnerProduct,
    ) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]).then(a.cmp(&b)));

        let sorted_values: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
        let mut vectors = Array2::<f64>::zeros((n, n));
        for (col, &src) in order.iter().enumerate() {
            let row = &vt[src * n..(src + 1) * n];
            for (r, &x) in row.iter().enumerate() {
                vectors[(r, col)] = x;
            }
        }
        vt.clear();
        Spectrum {
            eigenvalues: sorted_values,
            eigenvectors: vectors,
            inner_product,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector `i` as an owned vector.
    pub fn vector(&self, i: usize) -> Array1<f64> {
        self.eigenvectors.column(i).to_owned()
    }

    /// CSV export `index,eigenvalue`.
    pub fn eigenvalues_to_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "index,eigenvalue")?;
        for (i, &ev) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{}", i, fmt_f64(ev))?;
        }
        Ok(())
    }

    /// JSON export of the eigenvalues alone.
    pub fn eigenvalues_to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.eigenvalues)?)
    }

    /// CSV export of the eigenvector matrix (row per node, column per mode).
    pub fn eigenvectors_to_csv(&self, w: &mut impl Write) -> Result<()> {
        for row in self.eigenvectors.rows() {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Size above which the experiments route through the tridiagonal backend;
/// cyclic Jacobi needs too many O(n^3) sweeps past a few hundred nodes.
const JACOBI_MAX_AUTO: usize = 260;

/// Eigendecomposition with automatic backend choice: cyclic Jacobi for small
/// matrices, Householder tridiagonalization + QL for large ones. Both satisfy
/// the same contract and are cross-checked in the test suite.
pub fn eig_sym_auto(matrix: &Array2<f64>, tol: f64) -> Result<Spectrum> {
    if matrix.nrows() <= JACOBI_MAX_AUTO {
        eig_sym(matrix, tol)
    } else {
        eig_sym_tridiagonal(matrix)
    }
}

/// The L2(Gn) inner product `(1/n) sum_i u_i v_i`.
pub fn gn_inner(u: &GraphSignal, v: &GraphSignal) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    Ok(gn_inner_slices(
        u.values.as_slice().expect("contiguous"),
        v.values.as_slice().expect("contiguous"),
    ))
}

pub(crate) fn gn_inner_slices(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    linalg::dot(u, v) / n as f64
}

pub(crate) fn gn_norm_slice(u: &[f64]) -> f64 {
    gn_inner_slices(u, u).sqrt()
}

/// Rescales eigenvectors by sqrt(n) so each has unit L2(Gn) norm.
pub fn gn_normalize(spectrum: Spectrum) -> Result<Spectrum> {
    if spectrum.inner_product == InnerProduct::Gn {
        return Err(Error::invalid(
            "spectrum is already gn-normalized (idempotence guard)",
        ));
    }
    let n = spectrum.eigenvectors.nrows();
    let scale = (n as f64).sqrt();
    Ok(Spectrum {
        eigenvalues: spectrum.eigenvalues,
        eigenvectors: spectrum.eigenvectors * scale,
        inner_product: InnerProduct::Gn,
    })
}

/// How one graph eigenvector was matched to its analytic counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    /// Simple eigenvalue: a sign a_i in {-1, +1}.
    Sign(i8),
    /// Member of a multiplicity cluster, aligned by an orthogonal rotation of
    /// the whole cluster block.
    Subspace,
}

/// Per-index comparison between the graph spectrum and the analytic one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub index: usize,
    pub lambda_graph: f64,
    pub lambda_analytic: f64,
    pub lambda_abs_error: f64,
    pub alignment: AlignmentMode,
    pub eigenfunction_l2gn_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub rows: Vec<AlignmentRow>,
    /// Eigengap of the analytic spectrum over multiplicity-collapsed values.
    pub theta: f64,
}

impl AlignmentReport {
    pub fn max_lambda_error(&self) -> f64 {
        self.rows
            .iter()
            .fold(0.0f64, |acc, r| acc.max(r.lambda_abs_error))
    }

    pub fn max_eigenfunction_error(&self) -> f64 {
        self.rows
            .iter()
            .fold(0.0f64, |acc, r| acc.max(r.eigenfunction_l2gn_error))
    }
}

/// Multiplicity clustering rule: consecutive eigenvalues closer than
/// `1e-6 + 1e-3 * lambda` belong to one cluster.
fn same_cluster(lo: f64, hi: f64) -> bool {
    (hi - lo).abs() <= 1e-6 + 1e-3 * hi.abs()
}

/// Matches the first K graph eigenpairs against the analytic spectrum.
///
/// Simple eigenvalues get a sign `a_i` chosen so that
/// `<P_n phi_i, phi_i_n>_Gn * a_i >= 0`; inside a multiplicity cluster the
/// graph eigenvector block is rotated onto the sampled analytic block by an
/// orthogonal least-squares (Procrustes) fit before per-index errors are
/// taken.
pub fn align_eigenpairs(
    graph_spec: &Spectrum,
    analytic: &AnalyticSpectrum,
    cloud: &PointCloud,
    k: usize,
) -> Result<AlignmentReport> {
    if graph_spec.inner_product != InnerProduct::Gn {
        return Err(Error::invalid("align_eigenpairs needs a gn-normalized spectrum"));
    }
    let n = cloud.len();
    if k > graph_spec.len() || k > analytic.len() {
        return Err(Error::invalid(format!(
            "K = {k} exceeds available eigenpairs (graph {}, analytic {})",
            graph_spec.len(),
            analytic.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }

    // sampled analytic eigenfunctions
    let mut sampled = Array2::<f64>::zeros((n, k));
    for i in 0..k {
        let phi = &analytic.entries[i].eigenfunction;
        for (r, mut row) in sampled.rows_mut().into_iter().enumerate() {
            row[i] = phi(cloud.point(r));
        }
    }

    // contiguous clusters among the first k analytic entries
    let mut clusters: Vec<(usize, usize)> = Vec::new(); // [start, end)
    let mut start = 0usize;
    for i in 1..k {
        let same_group = analytic.entries[i].multiplicity_group_id
            == analytic.entries[i - 1].multiplicity_group_id
            || same_cluster(
                analytic.entries[i - 1].eigenvalue,
                analytic.entries[i].eigenvalue,
            );
        if !same_group {
            clusters.push((start, i));
            start = i;
        }
    }
    clusters.push((start, k));

    let mut rows: Vec<AlignmentRow> = Vec::with_capacity(k);
    for &(lo, hi) in &clusters {
        let m = hi - lo;
        if m == 1 {
            let i = lo;
            let graph_vec = graph_spec.eigenvectors.column(i);
            let overlap = gn_inner_slices(
                sampled.column(i).to_owned().as_slice().expect("contiguous"),
                graph_vec.to_owned().as_slice().expect("contiguous"),
            );
            let sign = if overlap >= 0.0 { 1.0 } else { -1.0 };
            let diff: Vec<f64> = graph_vec
                .iter()
                .zip(sampled.column(i))
                .map(|(&g, &a)| sign * g - a)
                .collect();
            rows.push(AlignmentRow {
                index: i,
                lambda_graph: graph_spec.eigenvalues[i],
                lambda_analytic: analytic.entries[i].eigenvalue,
                lambda_abs_error: (graph_spec.eigenvalues[i] - analytic.entries[i].eigenvalue)
                    .abs(),
                alignment: AlignmentMode::Sign(sign as i8),
                eigenfunction_l2gn_error: gn_norm_slice(&diff),
            });
        } else {
            // orthogonal Procrustes: rotate the graph block onto the sampled
            // analytic block under the gn inner product
            let mut gram = Array2::<f64>::zeros((m, m));
            for a in 0..m {
                for b in 0..m {
                    gram[(a, b)] = gn_inner_slices(
                        graph_spec
                            .eigenvectors
                            .column(lo + a)
                            .to_owned()
                            .as_slice()
                            .expect("contiguous"),
                        sampled
                            .column(lo + b)
                            .to_owned()
                            .as_slice()
                            .expect("contiguous"),
                    );
                }
            }
            let q = linalg::polar_orthogonal(&gram)?;
            for b in 0..m {
                let i = lo + b;
                // rotated graph vector for analytic slot b
                let mut rotated = vec![0.0f64; n];
                for a in 0..m {
                    let col = graph_spec.eigenvectors.column(lo + a);
                    let w = q[(a, b)];
                    for (slot, &g) in rotated.iter_mut().zip(col) {
                        *slot += w * g;
                    }
                }
                let diff: Vec<f64> = rotated
                    .iter()
                    .zip(sampled.column(i))
                    .map(|(&g, &a)| g - a)
                    .collect();
                rows.push(AlignmentRow {
                    index: i,
                    lambda_graph: graph_spec.eigenvalues[i],
                    lambda_analytic: analytic.entries[i].eigenvalue,
                    lambda_abs_error: (graph_spec.eigenvalues[i]
                        - analytic.entries[i].eigenvalue)
                        .abs(),
                    alignment: AlignmentMode::Subspace,
                    eigenfunction_l2gn_error: gn_norm_slice(&diff),
                });
            }
        }
    }

    // eigengap over analytic values, including the one just past K when known
    let depth = (k + 1).min(analytic.len());
    let analytic_values: Vec<f64> = analytic.entries[..depth]
        .iter()
        .map(|e| e.eigenvalue)
        .collect();
    let collapsed = collapse_multiplicities(&analytic_values);
    let theta = if collapsed.len() >= 2 {
        collapsed
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };

    Ok(AlignmentReport { rows, theta })
}

fn collapse_multiplicities(sorted: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in sorted {
        match out.last() {
            Some(&last) if same_cluster(last, v) => {}
            _ => out.push(v),
        }
    }
    out
}

/// The eigengap `theta = min_{1<=i<=K} {lambda_i - lambda_{i-1},
/// lambda_{i+1} - lambda_i}` over multiplicity-collapsed values.
pub fn eigengap(eigenvalues: &[f64], k: usize) -> Result<f64> {
    let collapsed = collapse_multiplicities(eigenvalues);
    if collapsed.len() < k + 1 {
        return Err(Error::invalid(format!(
            "eigengap needs at least K+1 = {} distinct eigenvalues, got {}",
            k + 1,
            collapsed.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let mut theta = f64::INFINITY;
    for i in 1..=k {
        theta = theta.min(collapsed[i] - collapsed[i - 1]);
        if i + 1 < collapsed.len() {
            theta = theta.min(collapsed[i + 1] - collapsed[i]);
        }
    }
    Ok(theta)
}

/// An alpha-separated partition of a sorted spectrum into contiguous groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPartition {
    pub alpha: f64,
    /// Index ranges [start, end) into the sorted eigenvalue sequence.
    pub groups: Vec<(usize, usize)>,
    /// Gap between consecutive groups (length = groups - 1).
    pub group_gaps: Vec<f64>,
}

impl SpectrumPartition {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Indices of groups holding more than one eigenvalue.
    pub fn multi_groups(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, (s, e))| e - s > 1)
            .map(|(g, _)| g)
            .collect()
    }
}

/// Greedy split of a sorted spectrum: a new group starts whenever the gap to
/// the previous eigenvalue exceeds alpha. Eigenvalues in different groups then
/// differ by more than alpha.
pub fn alpha_partition(eigenvalues: &[f64], alpha: f64) -> Result<SpectrumPartition> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if eigenvalues.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("eigenvalues must be sorted ascending"));
    }
    let mut groups = Vec::new();
    let mut gaps = Vec::new();
    let mut start = 0usize;
    for i in 1..eigenvalues.len() {
        let gap = eigenvalues[i] - eigenvalues[i - 1];
        if gap > alpha {
            groups.push((start, i));
            gaps.push(gap);
            start = i;
        }
    }
    groups.push((start, eigenvalues.len()));
    Ok(SpectrumPartition {
        alpha,
        groups,
        group_gaps: gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CloudDomain;
    use crate::manifold::{lb_spectrum, ManifoldSpec};
    use ndarray::array;
    use rand::Rng;
    use std::sync::Arc;

    fn signal(values: Vec<f64>) -> GraphSignal {
        let n = values.len();
        let cloud = Arc::new(PointCloud {
            points: Array2::zeros((n, 2)),
            intrinsic_dim: 1,
            domain: CloudDomain::PlanarFreeSpace,
            seed: 0,
        });
        GraphSignal::new(Array1::from_vec(values), cloud).unwrap()
    }

    #[test]
    fn gn_inner_of_ones_is_one() {
        for n in [1usize, 4, 9] {
            let u = signal(vec![1.0; n]);
            assert_eq!(gn_inner(&u, &u).unwrap(), 1.0);
        }
    }

    #[test]
    fn gn_inner_disjoint_supports() {
        let u = signal(vec![1.0, 0.0, 0.0]);
        let v = signal(vec![0.0, 1.0, 0.0]);
        assert_eq!(gn_inner(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn gn_inner_direct_arithmetic() {
        // (1 + 2 + 3 + 4) / 4
        let u = signal(vec![1.0, 2.0, 3.0, 4.0]);
        let v = signal(vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(gn_inner(&u, &v).unwrap(), 2.5);
    }

    #[test]
    fn gn_inner_rejects_length_mismatch() {
        let u = signal(vec![1.0, 2.0]);
        let v = signal(vec![1.0, 2.0, 3.0]);
        assert!(gn_inner(&u, &v).is_err());
    }

    #[test]
    fn gn_inner_positive_definite() {
        let mut rng = crate::rng::rng_from_seed(5);
        for _ in 0..50 {
            let vals: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let u = signal(vals.clone());
            let ip = gn_inner(&u, &u).unwrap();
            assert!(ip >= 0.0);
            if vals.iter().any(|&v| v != 0.0) {
                assert!(ip > 0.0);
            }
        }
        let zero = signal(vec![0.0; 8]);
        assert_eq!(gn_inner(&zero, &zero).unwrap(), 0.0);
    }

    #[test]
    fn gn_normalize_scales_by_sqrt_n() {
        // an arbitrary standard-normalized unit vector at n = 4
        let spec = Spectrum {
            eigenvalues: vec![0.0; 4],
            eigenvectors: Array2::eye(4),
            inner_product: InnerProduct::Standard,
        };
        let gn = gn_normalize(spec).unwrap();
        assert_eq!(gn.eigenvectors[(0, 0)], 2.0);
        assert_eq!(gn.inner_product, InnerProduct::Gn);
    }

    #[test]
    fn gn_normalize_constant_vector() {
        // (1,...,1)/sqrt(n) standard-norm becomes (1,...,1) gn-norm
        let n = 9usize;
        let spec = Spectrum {
            eigenvalues: vec![0.0; n],
            eigenvectors: Array2::from_elem((n, n), 1.0 / (n as f64).sqrt()),
            inner_product: InnerProduct::Standard,
        };
        let gn = gn_normalize(spec).unwrap();
        for &v in gn.eigenvectors.column(0) {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gn_normalize_twice_is_rejected() {
        let spec = Spectrum {
            eigenvalues: vec![0.0; 2],
            eigenvectors: Array2::eye(2),
            inner_product: InnerProduct::Standard,
        };
        let once = gn_normalize(spec).unwrap();
        assert!(gn_normalize(once).is_err());
    }

    #[test]
    fn eigengap_examples() {
        assert_eq!(eigengap(&[0.0, 1.0, 4.0, 9.0], 2).unwrap(), 1.0);
        // collapse of the duplicate pair first
        assert_eq!(eigengap(&[0.0, 1.0, 1.0, 4.0], 2).unwrap(), 1.0);
        assert!(eigengap(&[3.0, 3.0, 3.0], 1).is_err());
    }

    #[test]
    fn alpha_partition_examples() {
        let p = alpha_partition(&[0.0, 0.1, 5.0, 5.2], 1.0).unwrap();
        assert_eq!(p.groups, vec![(0, 2), (2, 4)]);
        // Definition-1 property, exhaustively
        let vals = [0.0f64, 0.1, 5.0, 5.2];
        for (gi, &(s1, e1)) in p.groups.iter().enumerate() {
            for (gj, &(s2, e2)) in p.groups.iter().enumerate() {
                if gi == gj {
                    continue;
                }
                for i in s1..e1 {
                    for j in s2..e2 {
                        assert!((vals[i] - vals[j]).abs() > 1.0);
                    }
                }
            }
        }

        let single = alpha_partition(&[0.0, 0.5, 1.0], 10.0).unwrap();
        assert_eq!(single.group_count(), 1);

        let singletons = alpha_partition(&[0.0, 2.0, 4.0, 6.0], 1.0).unwrap();
        assert_eq!(singletons.group_count(), 4);
        assert!(singletons.multi_groups().is_empty());
    }

    #[test]
    fn alpha_partition_rejects_bad_input() {
        assert!(alpha_partition(&[0.0, 1.0], 0.0).is_err());
        assert!(alpha_partition(&[], 1.0).is_err());
        assert!(alpha_partition(&[1.0, 0.5], 1.0).is_err());
    }

    /// Shifted power iteration as an independent oracle for the dominant
    /// eigenvalue, with deflation for the rest.
    fn power_iteration_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
        let n = m.nrows();
        // shift to make all eigenvalues positive: A + cI
        let shift = linalg::inf_norm(m) + 1.0;
        let mut work = m.clone();
        for i in 0..n {
            work[(i, i)] += shift;
        }
        let mut found: Vec<(f64, Array1<f64>)> = Vec::new();
        for _ in 0..n {
            let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
            // deflate previously found directions
            for _ in 0..10_000 {
                for (_, u) in &found {
                    let proj = v.dot(u);
                    v = &v - &(u * proj);
                }
                let mut next = work.dot(&v);
                for (_, u) in &found {
                    let proj = next.dot(u);
                    next = &next - &(u * proj);
                }
                let norm = next.dot(&next).sqrt();
                if norm < 1e-300 {
                    break;
                }
                next /= norm;
                let delta = (&next - &v).iter().map(|x| x.abs()).fold(0.0f64, f64::max);
                v = next;
                if delta < 1e-13 {
                    break;
                }
            }
            let lambda = v.dot(&work.dot(&v));
            found.push((lambda, v));
        }
        let mut vals: Vec<f64> = found.iter().map(|(l, _)| l - shift).collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    #[test]
    fn eig_sym_matches_power_iteration_oracle() {
        let mut rng = crate::rng::rng_from_seed(21);
        for _ in 0..10 {
            let mut m = Array2::<f64>::zeros((5, 5));
            for i in 0..5 {
                for j in i..5 {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let spec = eig_sym(&m, 1e-12).unwrap();
            let oracle = power_iteration_eigenvalues(&m);
            for (a, b) in spec.eigenvalues.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-6, "jacobi {a} vs power iteration {b}");
            }
        }
    }

    #[test]
    fn eig_sym_reconstruction_and_orthonormality() {
        let mut rng = crate::rng::rng_from_seed(33);
        for &n in &[3usize, 10, 25, 50] {
            let mut m = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let spec = eig_sym(&m, 1e-12).unwrap();
            check_spectrum_contract(&m, &spec);
        }
    }

    pub(crate) fn check_spectrum_contract(m: &Array2<f64>, spec: &Spectrum) {
        let n = m.nrows();
        // ascending
        assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        // orthonormality
        let gram = spec.eigenvectors.t().dot(&spec.eigenvectors);
        let defect = linalg::max_abs(&(&gram - &Array2::<f64>::eye(n)));
        assert!(defect < 1e-8, "gram defect {defect}");
        // reconstruction
        let lam = Array2::from_diag(&Array1::from_vec(spec.eigenvalues.clone()));
        let rebuilt = spec.eigenvectors.dot(&lam).dot(&spec.eigenvectors.t());
        let err = linalg::max_abs(&(&rebuilt - m));
        let scale = linalg::max_abs(m).max(1e-12);
        assert!(err <= 1e-8 * scale, "reconstruction error {err}");
    }

    #[test]
    fn tridiagonal_agrees_with_jacobi() {
        let mut rng = crate::rng::rng_from_seed(8);
        for &n in &[4usize, 17, 60] {
            let mut m = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let a = eig_sym(&m, 1e-12).unwrap();
            let b = eig_sym_tridiagonal(&m).unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
            check_spectrum_contract(&m, &b);
        }
    }

    fn circle_alignment(n: usize, k: usize, seed: u64) -> (AlignmentReport, f64) {
        let m = ManifoldSpec::circle(1.0).unwrap();
        let cloud = crate::manifold::sample_uniform(&m, n, seed).unwrap();
        let eps = crate::graph::default_epsilon(n, 1);
        let g = crate::graph::build_graph(&cloud, eps, crate::graph::DistanceMetric::Euclidean, None)
            .unwrap();
        let spec = eig_sym_auto(&g.laplacian, 1e-12).unwrap();
        let gn = gn_normalize(spec).unwrap();
        let analytic = lb_spectrum(&m, k + 1).unwrap();
        let rep = align_eigenpairs(&gn, &analytic, &cloud, k).unwrap();
        (rep, eps)
    }

    #[test]
    fn alignment_kernel_mode_is_exact() {
        let (rep, _) = circle_alignment(120, 5, momentum_seed(0));
        assert!(rep.rows[0].lambda_abs_error <= 1e-10);
        assert!(rep.rows[0].eigenfunction_l2gn_error <= 1e-6);
        assert_eq!(rep.theta, 1.0);
    }

    fn momentum_seed(i: u64) -> u64 {
        crate::rng::derive_seed(0xa11ce, 0, i)
    }

    #[test]
    fn alignment_improves_with_n() {
        let (coarse, _) = circle_alignment(250, 5, momentum_seed(1));
        let (fine, _) = circle_alignment(1000, 5, momentum_seed(1));
        let err_coarse = coarse
            .rows
            .iter()
            .filter(|r| r.lambda_analytic > 0.5 && r.lambda_analytic < 2.0)
            .map(|r| r.eigenfunction_l2gn_error)
            .fold(0.0f64, f64::max);
        let err_fine = fine
            .rows
            .iter()
            .filter(|r| r.lambda_analytic > 0.5 && r.lambda_analytic < 2.0)
            .map(|r| r.eigenfunction_l2gn_error)
            .fold(0.0f64, f64::max);
        assert!(
            err_fine < err_coarse,
            "lambda=1 eigenfunction error should shrink: {err_fine} vs {err_coarse}"
        );
    }

    #[test]
    fn spectrum_exports() {
        let spec = eig_sym(&array![[2.0, 1.0], [1.0, 2.0]], 1e-12).unwrap();
        let mut buf = Vec::new();
        spec.eigenvalues_to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "index,eigenvalue");
        assert_eq!(text.lines().count(), 3);

        let json = spec.eigenvalues_to_json().unwrap();
        let back: Vec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec.eigenvalues);

        let mut buf = Vec::new();
        spec.eigenvectors_to_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn alignment_invariant_under_graph_sign_flips() {
        let m = ManifoldSpec::circle(1.0).unwrap();
        let cloud = crate::manifold::sample_uniform(&m, 90, 4).unwrap();
        let eps = crate::graph::default_epsilon(90, 1);
        let g = crate::graph::build_graph(&cloud, eps, crate::graph::DistanceMetric::Euclidean, None)
            .unwrap();
        let spec = eig_sym(&g.laplacian, 1e-12).unwrap();
        let analytic = lb_spectrum(&m, 6).unwrap();

        let base = align_eigenpairs(&gn_normalize(spec.clone()).unwrap(), &analytic, &cloud, 5)
            .unwrap();
        for flip in 0..5 {
            let mut flipped = spec.clone();
            for r in 0..flipped.eigenvectors.nrows() {
                flipped.eigenvectors[(r, flip)] = -flipped.eigenvectors[(r, flip)];
            }
            let rep = align_eigenpairs(&gn_normalize(flipped).unwrap(), &analytic, &cloud, 5)
                .unwrap();
            for (a, b) in base.rows.iter().zip(&rep.rows) {
                assert!(
                    (a.eigenfunction_l2gn_error - b.eigenfunction_l2gn_error).abs() < 1e-9,
                    "sign flip {flip} changed error: {} vs {}",
                    a.eigenfunction_l2gn_error,
                    b.eigenfunction_l2gn_error
                );
                assert_eq!(a.lambda_abs_error, b.lambda_abs_error);
            }
        }
    }
}
