//! Frequency responses and spectral filters, graph and continuous-time.
//!
//! A filter is either a closed-form frequency response h(lambda) or a tap
//! sequence for the shift-and-sum graph convolution. The continuous-time
//! impulse response is never discretized directly; every theorem statement
//! consumes h(lambda), so that is what filters are specified by.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSignal;
use crate::linalg;
use crate::spectral::{alpha_partition, InnerProduct, Spectrum, SpectrumPartition};

/// Named closed-form frequency response families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ResponseSpec {
    /// `h(lambda) = exp(-tau lambda)`.
    Heat { tau: f64 },
    /// `h(lambda) = 1 / (1 + mu lambda)`.
    Tikhonov { mu: f64 },
    /// Gaussian notch `h(lambda) = 1 - depth exp(-((lambda - center)/width)^2)`.
    BandReject { center: f64, width: f64, depth: f64 },
    /// Piecewise-linear interpolation of a sorted `(lambda, h)` grid, clamped
    /// at the ends.
    Tabulated { grid: Vec<(f64, f64)> },
}

impl ResponseSpec {
    pub fn tabulated(grid: Vec<(f64, f64)>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid("tabulated response needs at least one point"));
        }
        if grid.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid(
                "tabulated grid must be strictly increasing in lambda",
            ));
        }
        Ok(ResponseSpec::Tabulated { grid })
    }

    /// Mathematical evaluation, defined for any real lambda.
    pub(crate) fn eval_unchecked(&self, lambda: f64) -> f64 {
        match self {
            ResponseSpec::Heat { tau } => (-tau * lambda).exp(),
            ResponseSpec::Tikhonov { mu } => 1.0 / (1.0 + mu * lambda),
            ResponseSpec::BandReject {
                center,
                width,
                depth,
            } => {
                let z = (lambda - center) / width;
                1.0 - depth * (-z * z).exp()
            }
            ResponseSpec::Tabulated { grid } => {
                if lambda <= grid[0].0 {
                    return grid[0].1;
                }
                if lambda >= grid[grid.len() - 1].0 {
                    return grid[grid.len() - 1].1;
                }
                let pos = grid.partition_point(|&(x, _)| x <= lambda);
                let (x0, y0) = grid[pos - 1];
                let (x1, y1) = grid[pos];
                if x0 == lambda {
                    return y0;
                }
                y0 + (y1 - y0) * (lambda - x0) / (x1 - x0)
            }
        }
    }
}

/// A filter: closed-form frequency response or polynomial taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FilterSpec {
    Response(ResponseSpec),
    Taps { taps: Vec<f64> },
}

impl FilterSpec {
    pub fn response(spec: ResponseSpec) -> Self {
        FilterSpec::Response(spec)
    }

    pub fn taps(taps: Vec<f64>) -> Self {
        FilterSpec::Taps { taps }
    }

    pub fn heat(tau: f64) -> Self {
        FilterSpec::Response(ResponseSpec::Heat { tau })
    }

    pub fn as_response(&self) -> Result<&ResponseSpec> {
        match self {
            FilterSpec::Response(r) => Ok(r),
            FilterSpec::Taps { .. } => {
                Err(Error::invalid("a response-form filter is required here"))
            }
        }
    }

    /// Frequency response at `lambda`; for tap filters this is the polynomial
    /// `sum_k h_k lambda^k`. Tiny negative eigenvalues from floating-point
    /// noise are clamped to zero.
    pub fn response_at(&self, lambda: f64) -> Result<f64> {
        let lambda = if lambda < 0.0 && lambda > -1e-9 { 0.0 } else { lambda };
        if lambda < 0.0 {
            return Err(Error::invalid(format!(
                "frequency response undefined for negative lambda {lambda}"
            )));
        }
        match self {
            FilterSpec::Response(r) => Ok(r.eval_unchecked(lambda)),
            FilterSpec::Taps { taps } => {
                let mut acc = 0.0;
                for &h in taps.iter().rev() {
                    acc = acc * lambda + h;
                }
                Ok(acc)
            }
        }
    }
}

/// Evaluates a response-form filter at one frequency.
pub fn response_eval(spec: &FilterSpec, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::invalid(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    spec.as_response()?;
    spec.response_at(lambda)
}

/// Applies a response filter through the full eigendecomposition:
/// `g = sum_i h(lambda_i) <x, phi_i>_Gn phi_i` over all n eigenpairs.
pub fn spectral_filter_apply(
    spectrum: &Spectrum,
    spec: &FilterSpec,
    x: &GraphSignal,
) -> Result<GraphSignal> {
    if spectrum.inner_product != InnerProduct::Gn {
        return Err(Error::invalid(
            "spectral_filter_apply needs a gn-normalized spectrum",
        ));
    }
    let n = x.len();
    if spectrum.eigenvectors.nrows() != n {
        return Err(Error::invalid(format!(
            "spectrum is over {} nodes but signal has {}",
            spectrum.eigenvectors.nrows(),
            n
        )));
    }
    // coefficients under the gn inner product
    let coeffs = spectrum.eigenvectors.t().dot(&x.values) / n as f64;
    let mut scaled = Array1::<f64>::zeros(n);
    for (i, c) in coeffs.iter().enumerate() {
        scaled[i] = c * spec.response_at(spectrum.eigenvalues[i])?;
    }
    let out = spectrum.eigenvectors.dot(&scaled);
    GraphSignal::new(out, x.cloud.clone())
}

/// `exp(-tau L) x` by scaling-and-squaring of the truncated Taylor series:
/// scale so the infinity norm of `tau L / 2^s` is at most 0.5, apply 20
/// Taylor terms, then square `s` times. Eigendecomposition-free, so it serves
/// as an independent oracle for the spectral route.
pub fn heat_filter_oracle(
    laplacian: &Array2<f64>,
    tau: f64,
    x: &GraphSignal,
) -> Result<GraphSignal> {
    if tau < 0.0 {
        return Err(Error::invalid("tau must be nonnegative"));
    }
    let n = linalg::check_symmetric(laplacian, 1e-12)?;
    if x.len() != n {
        return Err(Error::invalid("signal length does not match laplacian"));
    }
    if tau == 0.0 {
        return Ok(x.clone());
    }

    let a = laplacian * (-tau);
    let norm = linalg::inf_norm(&a);
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.5 {
        s += 1;
    }
    let scaled = &a / 2f64.powi(s as i32);

    // Horner evaluation of 20 Taylor terms: I + A(I + A/2 (I + A/3 (...)))
    let eye = Array2::<f64>::eye(n);
    let mut exp = eye.clone();
    for k in (1..20usize).rev() {
        exp = &eye + &(scaled.dot(&exp) / k as f64);
    }
    for _ in 0..s {
        exp = exp.dot(&exp);
    }
    GraphSignal::new(exp.dot(&x.values), x.cloud.clone())
}

/// Shift-and-sum polynomial graph filter `sum_k h_k S^k x`, evaluated with a
/// single running diffusion vector.
pub fn poly_filter_apply(gso: &Array2<f64>, taps: &[f64], x: &GraphSignal) -> Result<GraphSignal> {
    let n = linalg::check_square(gso)?;
    if x.len() != n {
        return Err(Error::invalid(format!(
            "gso is {n}x{n} but signal has length {}",
            x.len()
        )));
    }
    if taps.is_empty() {
        return Err(Error::invalid("tap sequence must be nonempty"));
    }
    let mut shifted = x.values.clone();
    let mut out = &shifted * taps[0];
    for &h in &taps[1..] {
        shifted = gso.dot(&shifted);
        out = &out + &(&shifted * h);
    }
    GraphSignal::new(out, x.cloud.clone())
}

/// Result of checking the frequency-difference-threshold property.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdtReport {
    pub alpha: f64,
    pub gamma: f64,
    pub partition: SpectrumPartition,
    /// Max response variation within each group.
    pub per_group_variation: Vec<f64>,
    pub passes: bool,
}

impl FdtReport {
    pub fn max_variation(&self) -> f64 {
        self.per_group_variation
            .iter()
            .fold(0.0f64, |a, &b| a.max(b))
    }
}

/// Partitions the spectrum at threshold `alpha` and measures the response
/// variation `gamma_k` inside each group; passes iff all are at most `gamma`.
pub fn fdt_check(
    spec: &FilterSpec,
    eigenvalues: &[f64],
    alpha: f64,
    gamma: f64,
) -> Result<FdtReport> {
    if eigenvalues.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let partition = alpha_partition(eigenvalues, alpha)?;
    let mut variations = Vec::with_capacity(partition.groups.len());
    for &(s, e) in &partition.groups {
        let mut worst = 0.0f64;
        for i in s..e {
            for j in (i + 1)..e {
                let hi = spec.response_at(eigenvalues[i])?;
                let hj = spec.response_at(eigenvalues[j])?;
                worst = worst.max((hi - hj).abs());
            }
        }
        variations.push(worst);
    }
    let passes = variations.iter().all(|&g| g <= gamma);
    Ok(FdtReport {
        alpha,
        gamma,
        partition,
        per_group_variation: variations,
        passes,
    })
}

/// Decomposes a response into `h^(0)` plus one `h^(l)` per multi-eigenvalue
/// group, each returned as a tabulated response over the input eigenvalues.
///
/// On singleton-group eigenvalues `h^(0)` equals `h(lambda) - sum_l h(C_l)`
/// and each `h^(l)` equals `h(C_l)`; on group `l` itself `h^(l)` equals
/// `h(lambda)`; everywhere else they vanish. `C_l` is the midpoint of group
/// l's eigenvalue range. The parts sum to `h` at every input eigenvalue.
pub fn fdt_decompose(
    spec: &FilterSpec,
    partition: &SpectrumPartition,
    eigenvalues: &[f64],
) -> Result<Vec<FilterSpec>> {
    // the partition must tile the eigenvalue sequence
    let mut expected_start = 0usize;
    for &(s, e) in &partition.groups {
        if s != expected_start || e <= s {
            return Err(Error::invalid("partition does not match the eigenvalues"));
        }
        expected_start = e;
    }
    if expected_start != eigenvalues.len() {
        return Err(Error::invalid("partition does not match the eigenvalues"));
    }

    let multi = partition.multi_groups();
    let centers: Vec<f64> = multi
        .iter()
        .map(|&g| {
            let (s, e) = partition.groups[g];
            0.5 * (eigenvalues[s] + eigenvalues[e - 1])
        })
        .collect();
    let mut center_sum = 0.0;
    for &c in &centers {
        center_sum += spec.response_at(c)?;
    }

    // group id per eigenvalue index
    let mut group_of = vec![0usize; eigenvalues.len()];
    for (g, &(s, e)) in partition.groups.iter().enumerate() {
        for item in group_of.iter_mut().take(e).skip(s) {
            *item = g;
        }
    }
    let is_multi = |g: usize| multi.contains(&g);

    let build = |values: Vec<f64>| -> Result<FilterSpec> {
        // dedup exactly repeated eigenvalues (degenerate clusters share a value)
        let mut grid: Vec<(f64, f64)> = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            match grid.last() {
                Some(&(x, y)) if x == eigenvalues[i] => {
                    debug_assert_eq!(y, v);
                }
                _ => grid.push((eigenvalues[i], v)),
            }
        }
        Ok(FilterSpec::Response(ResponseSpec::tabulated(grid)?))
    };

    let mut parts = Vec::with_capacity(1 + multi.len());
    // h^(0)
    let mut base = Vec::with_capacity(eigenvalues.len());
    for (i, &lam) in eigenvalues.iter().enumerate() {
        if is_multi(group_of[i]) {
            base.push(0.0);
        } else {
            base.push(spec.response_at(lam)? - center_sum);
        }
    }
    parts.push(build(base)?);

    // one h^(l) per multi group
    for (mi, &g) in multi.iter().enumerate() {
        let h_center = spec.response_at(centers[mi])?;
        let mut values = Vec::with_capacity(eigenvalues.len());
        for (i, &lam) in eigenvalues.iter().enumerate() {
            if group_of[i] == g {
                values.push(spec.response_at(lam)?);
            } else if is_multi(group_of[i]) {
                values.push(0.0);
            } else {
                values.push(h_center);
            }
        }
        parts.push(build(values)?);
    }
    Ok(parts)
}

/// Grid-difference estimate of the Lipschitz constant of a response over
/// `[lo, hi]`. A lower estimate of the true constant.
pub fn lipschitz_constant(spec: &FilterSpec, lo: f64, hi: f64, grid_n: usize) -> Result<f64> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::invalid("need 0 <= lo < hi"));
    }
    if grid_n < 2 {
        return Err(Error::invalid("grid_n must be at least 2"));
    }
    let step = (hi - lo) / (grid_n - 1) as f64;
    let mut prev = spec.response_at(lo)?;
    let mut worst = 0.0f64;
    for i in 1..grid_n {
        let lam = lo + step * i as f64;
        let cur = spec.response_at(lam)?;
        worst = worst.max((cur - prev).abs() / step);
        prev = cur;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CloudDomain, PointCloud};
    use crate::spectral::{eig_sym, gn_normalize};
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

    fn random_psd(n: usize, rng: &mut impl Rng) -> Array2<f64> {
        let mut b = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        b.t().dot(&b)
    }

    #[test]
    fn response_eval_closed_forms() {
        let heat = FilterSpec::heat(1.0);
        assert_eq!(response_eval(&heat, 0.0).unwrap(), 1.0);
        assert!((response_eval(&heat, 1.0).unwrap() - 0.36787944117144233).abs() < 1e-16);

        let tik = FilterSpec::response(ResponseSpec::Tikhonov { mu: 1.0 });
        assert_eq!(response_eval(&tik, 1.0).unwrap(), 0.5);

        assert!(response_eval(&heat, -0.5).is_err());
        assert!(response_eval(&FilterSpec::taps(vec![1.0]), 1.0).is_err());
    }

    #[test]
    fn heat_response_bounded_and_monotone() {
        for &tau in &[0.0, 0.5, 1.0, 3.0] {
            let spec = FilterSpec::heat(tau);
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let lam = i as f64 * 0.1;
                let h = response_eval(&spec, lam).unwrap();
                assert!(h > 0.0 && h <= 1.0);
                assert!(h <= prev);
                prev = h;
            }
        }
    }

    #[test]
    fn closed_form_families_bounded_by_one() {
        for &mu in &[0.0, 0.3, 2.0] {
            let spec = FilterSpec::response(ResponseSpec::Tikhonov { mu });
            for i in 0..200 {
                let h = response_eval(&spec, i as f64 * 0.1).unwrap();
                assert!(h.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn spectral_filter_requires_gn_normalization() {
        let spec = eig_sym(&array![[2.0, 1.0], [1.0, 2.0]], 1e-12).unwrap();
        let x = signal(vec![1.0, -1.0]);
        assert!(spectral_filter_apply(&spec, &FilterSpec::heat(1.0), &x).is_err());
    }

    fn gn_spectrum_of(m: &Array2<f64>) -> Spectrum {
        gn_normalize(eig_sym(m, 1e-12).unwrap()).unwrap()
    }

    #[test]
    fn identity_response_reproduces_signal() {
        let mut rng = crate::rng::rng_from_seed(3);
        let m = random_psd(12, &mut rng);
        let spec = gn_spectrum_of(&m);
        let x = signal((0..12).map(|i| (i as f64 * 0.37).sin()).collect());
        let y = spectral_filter_apply(&spec, &FilterSpec::heat(0.0), &x).unwrap();
        for (a, b) in x.values.iter().zip(y.values.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_response_annihilates() {
        let mut rng = crate::rng::rng_from_seed(4);
        let m = random_psd(8, &mut rng);
        let spec = gn_spectrum_of(&m);
        let zero = FilterSpec::response(
            ResponseSpec::tabulated(vec![(0.0, 0.0), (1e6, 0.0)]).unwrap(),
        );
        let x = signal(vec![1.0; 8]);
        let y = spectral_filter_apply(&spec, &zero, &x).unwrap();
        assert!(y.values.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn heat_preserves_constants_on_laplacian_kernel() {
        // a laplacian-like PSD matrix with the all-ones kernel vector
        let w = array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        let mut lap = Array2::<f64>::zeros((3, 3));
        for i in 0..3 {
            let mut deg = 0.0;
            for j in 0..3 {
                if i != j {
                    deg += w[(i, j)];
                    lap[(i, j)] = -w[(i, j)];
                }
            }
            lap[(i, i)] = deg;
        }
        let spec = gn_spectrum_of(&lap);
        let c = signal(vec![3.7; 3]);
        let y = spectral_filter_apply(&spec, &FilterSpec::heat(1.0), &c).unwrap();
        for &v in y.values.iter() {
            assert!((v - 3.7).abs() < 1e-8);
        }
    }

    #[test]
    fn heat_oracle_identity_at_tau_zero() {
        let m = array![[1.0, 0.0], [0.0, 2.0]];
        let x = signal(vec![0.3, -0.4]);
        let y = heat_filter_oracle(&m, 0.0, &x).unwrap();
        assert_eq!(y.values, x.values);
    }

    #[test]
    fn heat_oracle_diagonal_closed_form() {
        let m = array![[1.0, 0.0], [0.0, 2.0]];
        let x = signal(vec![1.0, 1.0]);
        let y = heat_filter_oracle(&m, 1.0, &x).unwrap();
        assert!((y.values[0] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((y.values[1] - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn heat_oracle_rejects_negative_tau() {
        let m = array![[1.0, 0.0], [0.0, 2.0]];
        let x = signal(vec![1.0, 1.0]);
        assert!(heat_filter_oracle(&m, -0.1, &x).is_err());
    }

    /// The spectral route and the matrix exponential are mutual oracles.
    #[test]
    fn spectral_route_matches_matrix_exponential() {
        let mut rng = crate::rng::rng_from_seed(12);
        for trial in 0..50 {
            let n = rng.gen_range(2..=20);
            let m = random_psd(n, &mut rng);
            let tau: f64 = rng.gen_range(0.0..2.0);
            let x = signal((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let spec = gn_spectrum_of(&m);
            let a = spectral_filter_apply(&spec, &FilterSpec::heat(tau), &x).unwrap();
            let b = heat_filter_oracle(&m, tau, &x).unwrap();
            let worst = a
                .values
                .iter()
                .zip(b.values.iter())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-7, "trial {trial}: discrepancy {worst}");
        }
    }

    #[test]
    fn poly_filter_tap_identities() {
        let s = array![[0.0, 1.0], [1.0, 0.0]];
        let x = signal(vec![2.0, -1.0]);
        let y = poly_filter_apply(&s, &[1.0], &x).unwrap();
        assert_eq!(y.values, x.values);

        let y = poly_filter_apply(&s, &[0.0, 1.0], &x).unwrap();
        assert_eq!(y.values, Array1::from_vec(vec![-1.0, 2.0]));

        // single tap is scalar multiplication
        let y = poly_filter_apply(&s, &[2.5], &x).unwrap();
        assert_eq!(y.values, &x.values * 2.5);
    }

    #[test]
    fn poly_filter_matches_dense_polynomial() {
        let mut rng = crate::rng::rng_from_seed(9);
        let mut s = Array2::<f64>::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                s[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let taps = [1.0, 2.0, 3.0];
        let x = signal((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let fast = poly_filter_apply(&s, &taps, &x).unwrap();
        // dense evaluation h0 I + h1 S + h2 S^2
        let dense = Array2::<f64>::eye(4) * taps[0] + &s * taps[1] + s.dot(&s) * taps[2];
        let want = dense.dot(&x.values);
        for (a, b) in fast.values.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn poly_filter_linearity() {
        let mut rng = crate::rng::rng_from_seed(14);
        let mut s = Array2::<f64>::zeros((5, 5));
        for i in 0..5 {
            for j in 0..5 {
                s[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let taps = [0.5, -1.0, 0.25, 2.0];
        let x = signal((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let y = signal((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let beta = 1.7;
        let combo = signal(
            x.values
                .iter()
                .zip(y.values.iter())
                .map(|(a, b)| a + beta * b)
                .collect(),
        );
        let f_combo = poly_filter_apply(&s, &taps, &combo).unwrap();
        let fx = poly_filter_apply(&s, &taps, &x).unwrap();
        let fy = poly_filter_apply(&s, &taps, &y).unwrap();
        for i in 0..5 {
            let want = fx.values[i] + beta * fy.values[i];
            assert!((f_combo.values[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn fdt_constant_response_always_passes() {
        let c = FilterSpec::response(ResponseSpec::tabulated(vec![(0.0, 0.7), (100.0, 0.7)]).unwrap());
        let rep = fdt_check(&c, &[0.0, 1.0, 1.1, 50.0], 5.0, 1e-9).unwrap();
        assert!(rep.passes);
        assert!(rep.per_group_variation.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn fdt_heat_on_clustered_pair() {
        let heat = FilterSpec::heat(1.0);
        let rep = fdt_check(&heat, &[0.0, 10.0, 10.01], 1.0, 1e-3).unwrap();
        assert_eq!(rep.partition.groups, vec![(0, 1), (1, 3)]);
        let var = rep.per_group_variation[1];
        let expected = (-10.0f64).exp() - (-10.01f64).exp();
        assert!((var - expected).abs() < 1e-12);
        assert!(var < 1e-5);
        assert!(rep.passes);
    }

    #[test]
    fn fdt_steep_response_fails() {
        // response jumps 0 -> 1 inside the clustered pair
        let steep = FilterSpec::response(
            ResponseSpec::tabulated(vec![(0.0, 0.0), (10.0, 0.0), (10.01, 1.0)]).unwrap(),
        );
        let rep = fdt_check(&steep, &[0.0, 10.0, 10.01], 1.0, 0.5).unwrap();
        assert!(!rep.passes);
        assert!((rep.per_group_variation[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fdt_decompose_all_singletons_returns_h() {
        let heat = FilterSpec::heat(1.0);
        let evs = [0.0, 2.0, 5.0];
        let part = alpha_partition(&evs, 1.0).unwrap();
        let parts = fdt_decompose(&heat, &part, &evs).unwrap();
        assert_eq!(parts.len(), 1);
        for &l in &evs {
            let got = parts[0].response_at(l).unwrap();
            let want = heat.response_at(l).unwrap();
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn fdt_decompose_clustered_heat_example() {
        let heat = FilterSpec::heat(1.0);
        let evs = [0.0, 5.0, 5.1];
        let part = alpha_partition(&evs, 1.0).unwrap();
        let parts = fdt_decompose(&heat, &part, &evs).unwrap();
        assert_eq!(parts.len(), 2);
        // h^(1) takes the response values on the cluster and h(C) = e^{-5.05}
        // on the singleton
        let h1 = &parts[1];
        assert!((h1.response_at(5.0).unwrap() - (-5.0f64).exp()).abs() < 1e-15);
        assert!((h1.response_at(5.1).unwrap() - (-5.1f64).exp()).abs() < 1e-15);
        assert!((h1.response_at(0.0).unwrap() - (-5.05f64).exp()).abs() < 1e-15);
        // h^(0)(0) = 1 - e^{-5.05}
        let h0 = &parts[0];
        assert!((h0.response_at(0.0).unwrap() - (1.0 - (-5.05f64).exp())).abs() < 1e-15);

        // reconstruction at every eigenvalue
        for &l in &evs {
            let sum: f64 = parts
                .iter()
                .map(|p| p.response_at(l).unwrap())
                .sum();
            assert!((sum - heat.response_at(l).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn fdt_decompose_rejects_mismatched_partition() {
        let heat = FilterSpec::heat(1.0);
        let part = alpha_partition(&[0.0, 5.0], 1.0).unwrap();
        assert!(fdt_decompose(&heat, &part, &[0.0, 5.0, 6.0]).is_err());
    }

    #[test]
    fn lipschitz_estimates() {
        let c = FilterSpec::response(ResponseSpec::tabulated(vec![(0.0, 0.4), (10.0, 0.4)]).unwrap());
        assert_eq!(lipschitz_constant(&c, 0.0, 10.0, 100).unwrap(), 0.0);

        // sup |h'| = tau at lambda = 0 for the heat response
        let heat = FilterSpec::heat(2.0);
        let est = lipschitz_constant(&heat, 0.0, 10.0, 10_000).unwrap();
        assert!((est - 2.0).abs() < 1e-2, "estimate {est}");
        assert!(est <= 2.0, "grid differencing is a lower estimate");

        let linear = FilterSpec::response(ResponseSpec::tabulated(vec![(0.0, 0.0), (2.0, 6.0)]).unwrap());
        let est = lipschitz_constant(&linear, 0.0, 2.0, 50).unwrap();
        assert!((est - 3.0).abs() < 1e-12);

        assert!(lipschitz_constant(&heat, 3.0, 1.0, 10).is_err());
        assert!(lipschitz_constant(&heat, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn spectral_filter_linearity() {
        let mut rng = crate::rng::rng_from_seed(31);
        let m = random_psd(9, &mut rng);
        let spec = gn_spectrum_of(&m);
        let f = FilterSpec::heat(0.7);
        let x = signal((0..9).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let y = signal((0..9).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let beta = -0.9;
        let combo = signal(
            x.values
                .iter()
                .zip(y.values.iter())
                .map(|(a, b)| a + beta * b)
                .collect(),
        );
        let lhs = spectral_filter_apply(&spec, &f, &combo).unwrap();
        let fx = spectral_filter_apply(&spec, &f, &x).unwrap();
        let fy = spectral_filter_apply(&spec, &f, &y).unwrap();
        for i in 0..9 {
            assert!((lhs.values[i] - (fx.values[i] + beta * fy.values[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn filter_spec_json_round_trip() {
        let heat = FilterSpec::heat(1.0);
        let json = serde_json::to_string(&heat).unwrap();
        assert_eq!(json, r#"{"form":"response","family":"heat","tau":1.0}"#);
        let back: FilterSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, heat);

        let taps = FilterSpec::taps(vec![1.0, 0.5]);
        let json = serde_json::to_string(&taps).unwrap();
        assert_eq!(json, r#"{"form":"taps","taps":[1.0,0.5]}"#);
        let back: FilterSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, taps);
    }
}
