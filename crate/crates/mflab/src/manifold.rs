//! Analytic manifold models with closed-form Laplace-Beltrami spectra.
//!
//! Two manifolds are supported: the circle of radius R embedded in the plane
//! and the flat 2-torus of side L embedded in R^4 as a product of two circles.
//! Both have closed-form eigenpairs, which is what makes the convergence
//! experiments checkable against exact ground truth. The measure is always
//! normalized to total mass 1 so that manifold and sampled inner products are
//! directly comparable.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::graph::{CloudDomain, PointCloud};
use crate::rng::rng_from_seed;

/// Which analytic manifold a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle,
    FlatTorus2d,
}

/// An analytic manifold: kind plus scale (circle radius or torus side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub scale: f64,
}

impl ManifoldSpec {
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("circle radius must be positive"));
        }
        Ok(ManifoldSpec {
            kind: ManifoldKind::Circle,
            scale: radius,
        })
    }

    pub fn flat_torus_2d(side: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::invalid("torus side must be positive"));
        }
        Ok(ManifoldSpec {
            kind: ManifoldKind::FlatTorus2d,
            scale: side,
        })
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 1,
            ManifoldKind::FlatTorus2d => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 2,
            ManifoldKind::FlatTorus2d => 4,
        }
    }

    /// Riemannian volume (circumference, respectively area). Uniform samples
    /// are drawn from the normalized measure, so kernel sums over them carry
    /// `volume / n` as the Monte-Carlo quadrature mass of the volume integral.
    pub fn volume(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle => 2.0 * PI * self.scale,
            ManifoldKind::FlatTorus2d => self.scale * self.scale,
        }
    }

    /// Radius of each embedded circle factor.
    fn factor_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle => self.scale,
            ManifoldKind::FlatTorus2d => self.scale / (2.0 * PI),
        }
    }

    /// Intrinsic angular coordinates of an ambient point.
    pub fn angles(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            ManifoldKind::Circle => vec![x[1].atan2(x[0])],
            ManifoldKind::FlatTorus2d => vec![x[1].atan2(x[0]), x[3].atan2(x[2])],
        }
    }

    /// Ambient embedding of intrinsic angles.
    pub fn embed(&self, angles: &[f64]) -> Vec<f64> {
        let r = self.factor_radius();
        match self.kind {
            ManifoldKind::Circle => vec![r * angles[0].cos(), r * angles[0].sin()],
            ManifoldKind::FlatTorus2d => vec![
                r * angles[0].cos(),
                r * angles[0].sin(),
                r * angles[1].cos(),
                r * angles[1].sin(),
            ],
        }
    }
}

/// Shared evaluator type for functions on ambient manifold points.
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One analytic eigenpair of the LB operator.
#[derive(Clone)]
pub struct AnalyticEigenpair {
    pub eigenvalue: f64,
    pub eigenfunction: PointFn,
    /// Eigenpairs with equal eigenvalue share a group id; downstream
    /// alignment works on these subspaces rather than individual vectors.
    pub multiplicity_group_id: usize,
}

/// The first K eigenpairs of a manifold's LB operator, ascending.
#[derive(Clone)]
pub struct AnalyticSpectrum {
    pub manifold: ManifoldSpec,
    pub entries: Vec<AnalyticEigenpair>,
}

impl fmt::Debug for AnalyticSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticSpectrum")
            .field("manifold", &self.manifold)
            .field(
                "eigenvalues",
                &self.entries.iter().map(|e| e.eigenvalue).collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl AnalyticSpectrum {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.eigenvalue).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A scalar signal on the manifold.
#[derive(Clone)]
pub struct ManifoldSignal {
    evaluator: PointFn,
    pub description: String,
    /// When set, the signal's spectral coefficients vanish beyond the first
    /// `band_limit` analytic eigenpairs.
    pub band_limit: Option<usize>,
    /// Exact coefficients in the analytic basis, present iff the signal was
    /// declared as a finite combination of analytic eigenfunctions.
    coefficients: Option<Vec<f64>>,
}

impl fmt::Debug for ManifoldSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldSignal")
            .field("description", &self.description)
            .field("band_limit", &self.band_limit)
            .finish()
    }
}

impl ManifoldSignal {
    /// A signal given by an arbitrary bounded evaluator.
    pub fn from_fn(
        description: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ManifoldSignal {
            evaluator: Arc::new(f),
            description: description.into(),
            band_limit: None,
            coefficients: None,
        }
    }

    /// A band-limited signal `sum_i coeffs[i] * phi_i` in the analytic basis.
    /// The exact coefficients are retained so inner products need no
    /// quadrature.
    pub fn band_limited(
        description: impl Into<String>,
        spectrum: &AnalyticSpectrum,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        if coeffs.len() > spectrum.len() {
            return Err(Error::invalid(format!(
                "{} coefficients but spectrum has only {} eigenpairs",
                coeffs.len(),
                spectrum.len()
            )));
        }
        let funcs: Vec<PointFn> = spectrum
            .entries
            .iter()
            .take(coeffs.len())
            .map(|e| Arc::clone(&e.eigenfunction))
            .collect();
        let c = coeffs.clone();
        let eval = move |x: &[f64]| -> f64 {
            funcs
                .iter()
                .zip(&c)
                .map(|(phi, ci)| ci * phi(x))
                .sum::<f64>()
        };
        Ok(ManifoldSignal {
            evaluator: Arc::new(eval),
            description: description.into(),
            band_limit: Some(coeffs.len()),
            coefficients: Some(coeffs),
        })
    }

    /// The `index`-th analytic eigenfunction as a signal.
    pub fn eigenmode(spectrum: &AnalyticSpectrum, index: usize) -> Result<Self> {
        if index >= spectrum.len() {
            return Err(Error::invalid(format!(
                "eigenmode {index} outside spectrum of length {}",
                spectrum.len()
            )));
        }
        let mut coeffs = vec![0.0; index + 1];
        coeffs[index] = 1.0;
        Self::band_limited(format!("eigenmode {index}"), spectrum, coeffs)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    pub fn exact_coefficients(&self) -> Option<&[f64]> {
        self.coefficients.as_deref()
    }
}

/// Draws `n` points uniformly (w.r.t. the normalized measure) and
/// independently from the manifold. Deterministic per seed.
pub fn sample_uniform(manifold: &ManifoldSpec, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 sample points"));
    }
    let mut rng = rng_from_seed(seed);
    let ambient = manifold.ambient_dim();
    let mut points = Array2::<f64>::zeros((n, ambient));
    for mut row in points.rows_mut() {
        let angles: Vec<f64> = (0..manifold.intrinsic_dim())
            .map(|_| rng.gen::<f64>() * 2.0 * PI)
            .collect();
        let x = manifold.embed(&angles);
        for (slot, xi) in row.iter_mut().zip(&x) {
            *slot = *xi;
        }
    }
    Ok(PointCloud {
        points,
        intrinsic_dim: manifold.intrinsic_dim(),
        domain: CloudDomain::Manifold(*manifold),
        seed,
    })
}

/// First `k` eigenpairs of the LB operator, ascending, with closed-form
/// eigenfunctions orthonormal under the normalized measure.
pub fn lb_spectrum(manifold: &ManifoldSpec, k: usize) -> Result<AnalyticSpectrum> {
    if k < 1 {
        return Err(Error::invalid("spectral depth K must be at least 1"));
    }
    let entries = match manifold.kind {
        ManifoldKind::Circle => circle_entries(manifold.scale, k),
        ManifoldKind::FlatTorus2d => torus_entries(manifold.scale, k),
    };
    Ok(AnalyticSpectrum {
        manifold: *manifold,
        entries,
    })
}

fn constant_eigenfunction() -> AnalyticEigenpair {
    AnalyticEigenpair {
        eigenvalue: 0.0,
        eigenfunction: Arc::new(|_x: &[f64]| 1.0),
        multiplicity_group_id: 0,
    }
}

/// Circle radius R: eigenvalue 0, then k^2/R^2 twice (cos and sin modes).
/// sqrt(2) scaling gives unit norm under the normalized measure.
fn circle_entries(radius: f64, k: usize) -> Vec<AnalyticEigenpair> {
    let mut entries = vec![constant_eigenfunction()];
    let mut freq = 1u64;
    while entries.len() < k {
        let lambda = (freq * freq) as f64 / (radius * radius);
        let group = freq as usize;
        let kf = freq as f64;
        entries.push(AnalyticEigenpair {
            eigenvalue: lambda,
            eigenfunction: Arc::new(move |x: &[f64]| {
                2f64.sqrt() * (kf * x[1].atan2(x[0])).cos()
            }),
            multiplicity_group_id: group,
        });
        entries.push(AnalyticEigenpair {
            eigenvalue: lambda,
            eigenfunction: Arc::new(move |x: &[f64]| {
                2f64.sqrt() * (kf * x[1].atan2(x[0])).sin()
            }),
            multiplicity_group_id: group,
        });
        freq += 1;
    }
    entries.truncate(k);
    entries
}

/// Flat 2-torus of side L: eigenvalues (2 pi / L)^2 |k|^2 over integer
/// frequency pairs, eigenfunctions sqrt(2) cos(k . theta), sqrt(2) sin(k . theta)
/// for one representative of each +/-k pair.
fn torus_entries(side: f64, k: usize) -> Vec<AnalyticEigenpair> {
    // enumerate half-lattice representatives by growing |k|^2 bound
    let mut reps: Vec<(i64, i64, i64)> = Vec::new(); // (norm2, k1, k2)
    let mut bound = 2i64;
    loop {
        reps.clear();
        let r = (bound as f64).sqrt().ceil() as i64;
        for k1 in 0..=r {
            for k2 in -r..=r {
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                let n2 = k1 * k1 + k2 * k2;
                if n2 <= bound {
                    reps.push((n2, k1, k2));
                }
            }
        }
        // 1 constant + 2 eigenfunctions per representative
        if 1 + 2 * reps.len() >= k {
            break;
        }
        bound *= 2;
    }
    reps.sort();

    let base = (2.0 * PI / side) * (2.0 * PI / side);
    let mut entries = vec![constant_eigenfunction()];
    let mut group = 0usize;
    let mut last_n2 = 0i64;
    for &(n2, k1, k2) in &reps {
        if entries.len() >= k {
            break;
        }
        if n2 != last_n2 {
            group += 1;
            last_n2 = n2;
        }
        let lambda = base * n2 as f64;
        let (a, b) = (k1 as f64, k2 as f64);
        entries.push(AnalyticEigenpair {
            eigenvalue: lambda,
            eigenfunction: Arc::new(move |x: &[f64]| {
                let t1 = x[1].atan2(x[0]);
                let t2 = x[3].atan2(x[2]);
                2f64.sqrt() * (a * t1 + b * t2).cos()
            }),
            multiplicity_group_id: group,
        });
        entries.push(AnalyticEigenpair {
            eigenvalue: lambda,
            eigenfunction: Arc::new(move |x: &[f64]| {
                let t1 = x[1].atan2(x[0]);
                let t2 = x[3].atan2(x[2]);
                2f64.sqrt() * (a * t1 + b * t2).sin()
            }),
            multiplicity_group_id: group,
        });
    }
    entries.truncate(k);
    entries
}

/// Applies a spectral filter to a manifold signal via truncation to the first
/// `k_trunc` analytic eigenpairs: `g = sum_{i<K} h(lambda_i) <f, phi_i> phi_i`.
///
/// Coefficients come from the signal's exact band-limited declaration when
/// available; otherwise `quad_n` seeded Monte-Carlo draws estimate them, which
/// requires `accept_truncation` because the tail beyond `k_trunc` is dropped.
pub fn manifold_filter_apply(
    response: &FilterSpec,
    f: &ManifoldSignal,
    spectrum: &AnalyticSpectrum,
    k_trunc: usize,
    quad_n: usize,
    seed: u64,
    accept_truncation: bool,
) -> Result<ManifoldSignal> {
    if k_trunc > spectrum.len() {
        return Err(Error::invalid(format!(
            "truncation depth {k_trunc} exceeds spectrum length {}",
            spectrum.len()
        )));
    }

    let exact = match (f.band_limit, f.exact_coefficients()) {
        (Some(b), Some(c)) if b <= k_trunc => Some(c),
        _ => None,
    };
    if exact.is_none() && !accept_truncation {
        return Err(Error::TruncationRefused(format!(
            "signal '{}' is not band-limited within {k_trunc}",
            f.description
        )));
    }

    let coeffs: Vec<f64> = match exact {
        Some(c) => {
            let mut v = c.to_vec();
            v.resize(k_trunc, 0.0);
            v
        }
        None => {
            // Monte-Carlo estimate of <f, phi_i> under the normalized measure
            let cloud = sample_uniform(&spectrum.manifold, quad_n.max(2), seed)?;
            let mut v = vec![0.0; k_trunc];
            for (i, slot) in v.iter_mut().enumerate() {
                let phi = &spectrum.entries[i].eigenfunction;
                let mut acc = 0.0;
                for row in cloud.points.rows() {
                    let x = row.as_slice().expect("contiguous row");
                    acc += f.eval(x) * phi(x);
                }
                *slot = acc / cloud.len() as f64;
            }
            v
        }
    };

    let filtered: Vec<f64> = coeffs
        .iter()
        .zip(&spectrum.entries)
        .map(|(c, e)| Ok(c * response.response_at(e.eigenvalue)?))
        .collect::<Result<_>>()?;

    ManifoldSignal::band_limited(
        format!("filtered({})", f.description),
        spectrum,
        filtered,
    )
}

/// Monte-Carlo Gram matrix of the first K analytic eigenfunctions; tends to
/// the identity as the sample count grows.
pub fn monte_carlo_gram(spectrum: &AnalyticSpectrum, samples: usize, seed: u64) -> Result<Array2<f64>> {
    let cloud = sample_uniform(&spectrum.manifold, samples, seed)?;
    let k = spectrum.len();
    let mut evals = Array2::<f64>::zeros((samples, k));
    for (r, row) in cloud.points.rows().into_iter().enumerate() {
        let x = row.as_slice().expect("contiguous row");
        for (c, e) in spectrum.entries.iter().enumerate() {
            evals[(r, c)] = (e.eigenfunction)(x);
        }
    }
    Ok(evals.t().dot(&evals) / samples as f64)
}
