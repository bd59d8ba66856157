//! Kernel graph construction from sampled point clouds.
//!
//! Edge weights follow the Gaussian kernel
//! `w_ij = (1/n) * 1/(eps (4 pi eps)^{d/2}) * exp(-|x_i - x_j|^2 / (4 eps))`
//! and the graph Laplacian is `L = diag(W 1) - W`. Matrices are dense: the
//! working scales here (n up to a few thousand) make exactness worth more
//! than sparsity.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldKind, ManifoldSpec, ManifoldSignal};
use crate::navigation::NavMap;
use crate::report::fmt_f64;

/// What a point cloud was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CloudDomain {
    /// Uniform samples of an analytic manifold.
    Manifold(ManifoldSpec),
    /// Free-space samples of a planar navigation map.
    PlanarFreeSpace,
}

impl CloudDomain {
    /// Total mass of the quadrature the cloud represents: samples are drawn
    /// from the normalized measure, so `(mass / n) sum_j g(x_j)` estimates the
    /// volume integral of `g`. Navigation clouds keep unit mass; their graph
    /// scale is normalized away downstream.
    pub fn quadrature_mass(&self) -> f64 {
        match self {
            CloudDomain::Manifold(m) => m.volume(),
            CloudDomain::PlanarFreeSpace => 1.0,
        }
    }
}

/// Points sampled from a manifold (or planar free space), with ambient
/// coordinates stored row-wise.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Array2<f64>,
    pub intrinsic_dim: usize,
    pub domain: CloudDomain,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i).to_slice().expect("contiguous row")
    }

    /// Checks the declared on-manifold invariants (circle radius, torus
    /// factor radii) to 1e-12 relative.
    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::invalid("point cloud needs at least 2 points"));
        }
        if let CloudDomain::Manifold(m) = self.domain {
            let tol = 1e-12;
            match m.kind {
                ManifoldKind::Circle => {
                    for row in self.points.rows() {
                        let r = (row[0] * row[0] + row[1] * row[1]).sqrt();
                        if (r - m.scale).abs() > tol * m.scale {
                            return Err(Error::invalid("point off the circle"));
                        }
                    }
                }
                ManifoldKind::FlatTorus2d => {
                    let factor = m.scale / (2.0 * PI);
                    for row in self.points.rows() {
                        let r1 = (row[0] * row[0] + row[1] * row[1]).sqrt();
                        let r2 = (row[2] * row[2] + row[3] * row[3]).sqrt();
                        if (r1 - factor).abs() > tol * factor || (r2 - factor).abs() > tol * factor {
                            return Err(Error::invalid("point off the torus"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// CSV export: `index,x0,x1,...` with 17-significant-digit floats.
    pub fn to_csv(&self, w: &mut impl Write) -> Result<()> {
        let dim = self.points.ncols();
        let header: Vec<String> = std::iter::once("index".to_string())
            .chain((0..dim).map(|j| format!("x{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, row) in self.points.rows().into_iter().enumerate() {
            let coords: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{},{}", i, coords.join(","))?;
        }
        Ok(())
    }
}

/// How pairwise distances are interpreted when building the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Euclidean,
    /// Pairs whose connecting segment crosses an obstacle get weight zero.
    ObstacleAware,
}

/// Kernel graph over a point cloud: dense adjacency and Laplacian.
#[derive(Debug, Clone)]
pub struct GeometricGraph {
    pub n: usize,
    pub epsilon: f64,
    pub adjacency: Array2<f64>,
    pub laplacian: Array2<f64>,
    pub distance_metric: DistanceMetric,
}

/// A signal sampled on the nodes of a graph.
#[derive(Debug, Clone)]
pub struct GraphSignal {
    pub values: Array1<f64>,
    pub cloud: Arc<PointCloud>,
}

impl GraphSignal {
    pub fn new(values: Array1<f64>, cloud: Arc<PointCloud>) -> Result<Self> {
        if values.len() != cloud.len() {
            return Err(Error::invalid(format!(
                "signal length {} does not match cloud size {}",
                values.len(),
                cloud.len()
            )));
        }
        Ok(GraphSignal { values, cloud })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Default kernel bandwidth `eps = n^{-1/(d+4)}`.
pub fn default_epsilon(n: usize, d: usize) -> f64 {
    (n as f64).powf(-1.0 / (d as f64 + 4.0))
}

fn kernel_prefactor(n: usize, d: usize, epsilon: f64) -> f64 {
    let vol = match d {
        1 => (4.0 * PI * epsilon).sqrt(),
        2 => 4.0 * PI * epsilon,
        _ => (4.0 * PI * epsilon).powf(d as f64 / 2.0),
    };
    1.0 / (n as f64 * epsilon * vol)
}

fn squared_distance(xi: &[f64], xj: &[f64]) -> f64 {
    xi.iter()
        .zip(xj)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Gaussian kernel edge weight between two ambient points.
pub fn kernel_weight(xi: &[f64], xj: &[f64], n: usize, d: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if n < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let dist2 = squared_distance(xi, xj);
    Ok(kernel_prefactor(n, d, epsilon) * (-dist2 / (4.0 * epsilon)).exp())
}

/// Builds the kernel graph and its Laplacian over a cloud.
///
/// Weights are the Gaussian kernel values times the cloud's quadrature mass,
/// so the rows of the Laplacian approximate the kernel integral against the
/// volume measure. With `ObstacleAware`, pairs whose segment crosses an
/// obstacle of `map` get weight zero. The adjacency diagonal keeps its
/// formula value (exponential factor 1); it cancels in the Laplacian.
pub fn build_graph(
    cloud: &PointCloud,
    epsilon: f64,
    metric: DistanceMetric,
    map: Option<&NavMap>,
) -> Result<GeometricGraph> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let n = cloud.len();
    if n < 2 {
        return Err(Error::invalid("graph needs at least 2 nodes"));
    }
    let map = match metric {
        DistanceMetric::Euclidean => None,
        DistanceMetric::ObstacleAware => {
            Some(map.ok_or_else(|| Error::invalid("obstacle_aware metric requires a map"))?)
        }
    };

    let d = cloud.intrinsic_dim;
    let pref = cloud.domain.quadrature_mass() * kernel_prefactor(n, d, epsilon);
    let inv4e = 1.0 / (4.0 * epsilon);

    // each row is computed independently and written into its own slot, so
    // the result is identical for any rayon worker count
    let mut adjacency = Array2::<f64>::zeros((n, n));
    adjacency
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let xi = cloud.point(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let xj = cloud.point(j);
                let w = if let Some(m) = map {
                    let p = [xi[0], xi[1]];
                    let q = [xj[0], xj[1]];
                    if i != j && !m.visible_unchecked(p, q) {
                        0.0
                    } else {
                        pref * (-squared_distance(xi, xj) * inv4e).exp()
                    }
                } else {
                    pref * (-squared_distance(xi, xj) * inv4e).exp()
                };
                *slot = w;
            }
        });

    // L = diag(W 1) - W; the diagonal self-weight cancels
    let mut laplacian = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut degree = 0.0f64;
        for j in 0..n {
            if j != i {
                degree += adjacency[(i, j)];
                laplacian[(i, j)] = -adjacency[(i, j)];
            }
        }
        laplacian[(i, i)] = degree;
    }

    Ok(GeometricGraph {
        n,
        epsilon,
        adjacency,
        laplacian,
        distance_metric: metric,
    })
}

/// The uniform sampling operator: restricts a manifold signal to the cloud.
pub fn sample_operator(f: &ManifoldSignal, cloud: &Arc<PointCloud>) -> Result<GraphSignal> {
    let mut values = Array1::<f64>::zeros(cloud.len());
    for (i, slot) in values.iter_mut().enumerate() {
        let v = f.eval(cloud.point(i));
        if !v.is_finite() {
            return Err(Error::EvaluationError(format!(
                "signal '{}' returned {v} at sample {i}",
                f.description
            )));
        }
        *slot = v;
    }
    GraphSignal::new(values, Arc::clone(cloud))
}

/// The graph Laplacian extended to arbitrary manifold points:
/// `(mass/n) 1/(eps (4 pi eps)^{d/2}) sum_j (f(x) - f(x_j)) exp(-|x - x_j|^2/(4 eps))`,
/// the same quadrature the built graph rows carry. At a sample point this
/// equals the corresponding Laplacian matrix row applied to the sampled
/// signal.
pub fn discrete_laplacian_at(
    f: &ManifoldSignal,
    x: &[f64],
    cloud: &PointCloud,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let n = cloud.len();
    let pref = cloud.domain.quadrature_mass() * kernel_prefactor(n, cloud.intrinsic_dim, epsilon);
    let inv4e = 1.0 / (4.0 * epsilon);
    let fx = f.eval(x);
    let mut acc = 0.0f64;
    for i in 0..n {
        let xj = cloud.point(i);
        let w = pref * (-squared_distance(x, xj) * inv4e).exp();
        acc += w * (fx - f.eval(xj));
    }
    Ok(acc)
}

/// Monte-Carlo estimate of the functional Laplacian
/// `vol/(eps (4 pi eps)^{d/2}) E_y[(f(x) - f(y)) exp(-|x - y|^2/(4 eps))]`
/// together with the standard error of the estimate. The expectation runs
/// over the normalized measure; the volume factor turns it into the kernel
/// integral against the volume measure, the n-to-infinity limit of the
/// discrete form.
pub fn functional_laplacian_stats(
    f: &ManifoldSignal,
    x: &[f64],
    manifold: &ManifoldSpec,
    epsilon: f64,
    quad_n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if quad_n < 1 {
        return Err(Error::invalid("quad_n must be at least 1"));
    }
    let cloud = crate::manifold::sample_uniform(manifold, quad_n.max(2), seed)?;
    let d = manifold.intrinsic_dim();
    let pref = manifold.volume()
        / (epsilon
            * match d {
                1 => (4.0 * PI * epsilon).sqrt(),
                _ => (4.0 * PI * epsilon).powf(d as f64 / 2.0),
            });
    let inv4e = 1.0 / (4.0 * epsilon);
    let fx = f.eval(x);

    let m = quad_n.max(2);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for i in 0..m {
        let y = cloud.point(i);
        let term = pref * (fx - f.eval(y)) * (-squared_distance(x, y) * inv4e).exp();
        sum += term;
        sum_sq += term * term;
    }
    let mean = sum / m as f64;
    let var = (sum_sq / m as f64 - mean * mean).max(0.0);
    let stderr = (var / m as f64).sqrt();
    Ok((mean, stderr))
}

/// The functional Laplacian estimate alone.
pub fn functional_laplacian_at(
    f: &ManifoldSignal,
    x: &[f64],
    manifold: &ManifoldSpec,
    epsilon: f64,
    quad_n: usize,
    seed: u64,
) -> Result<f64> {
    functional_laplacian_stats(f, x, manifold, epsilon, quad_n, seed).map(|(mean, _)| mean)
}

/// CSV edge list `(i, j, w)` over the upper triangle.
pub fn graph_to_edge_csv(graph: &GeometricGraph, w: &mut impl Write) -> Result<()> {
    writeln!(w, "i,j,w")?;
    for i in 0..graph.n {
        for j in (i + 1)..graph.n {
            writeln!(w, "{},{},{}", i, j, fmt_f64(graph.adjacency[(i, j)]))?;
        }
    }
    Ok(())
}
