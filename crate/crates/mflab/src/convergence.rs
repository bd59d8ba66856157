//! Experiments that check the convergence statements empirically.
//!
//! The bounds being verified are probabilistic with unknown constants, so the
//! experiments report per-trial errors, medians over trials, and fitted
//! log-log rates; only trends and signs are asserted, never the constants.
//! Every trial's randomness derives solely from `(master_seed, n, trial)`, so
//! parallel and serial runs emit identical reports.

use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{fdt_check, lipschitz_constant, spectral_filter_apply, FilterSpec};
use crate::graph::{
    build_graph, default_epsilon, discrete_laplacian_at, sample_operator, DistanceMetric,
};
use crate::linalg;
use crate::manifold::{
    lb_spectrum, manifold_filter_apply, sample_uniform, ManifoldSignal, ManifoldSpec,
};
use crate::report::fmt_f64;
use crate::rng::{derive_seed, derive_substream, rng_from_seed};
use crate::spectral::{align_eigenpairs, eig_sym_auto, gn_normalize};

/// Substream tags for per-trial randomness.
const TAG_CLOUD: u64 = 1;
const TAG_EVAL: u64 = 2;

/// How the kernel bandwidth depends on n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    /// `eps = n^{-1/(d+4)}`.
    PaperDefault,
    Fixed(f64),
}

impl EpsilonRule {
    pub fn epsilon(&self, n: usize, d: usize) -> f64 {
        match self {
            EpsilonRule::PaperDefault => default_epsilon(n, d),
            EpsilonRule::Fixed(v) => *v,
        }
    }
}

/// Configuration shared by the theorem experiments.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub manifold: ManifoldSpec,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub epsilon_rule: EpsilonRule,
    /// Spectral depth: how many analytic eigenpairs participate.
    pub k: usize,
    pub filter: FilterSpec,
    pub signal: ManifoldSignal,
    /// Number of evaluation points for the pointwise operator experiment.
    pub eval_points: usize,
    /// Threshold for the spectrum partition recorded by the filter experiment.
    pub fdt_alpha: f64,
    /// Variation budget for the same report.
    pub fdt_gamma: f64,
    /// Permit non-band-limited signals in the filter experiment.
    pub allow_truncation: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::invalid("n_values must be nonempty"));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("n_values must be strictly ascending"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("need at least one trial"));
        }
        if self.k < 1 {
            return Err(Error::invalid("spectral depth K must be at least 1"));
        }
        Ok(())
    }

    /// Circle defaults used throughout: heat tau = 1 and the first nonzero
    /// cosine mode as the band-limited signal.
    pub fn circle_defaults(
        radius: f64,
        n_values: Vec<usize>,
        trials: usize,
        master_seed: u64,
        k: usize,
    ) -> Result<Self> {
        let manifold = ManifoldSpec::circle(radius)?;
        let spectrum = lb_spectrum(&manifold, k.max(2))?;
        let signal = ManifoldSignal::eigenmode(&spectrum, 1)?;
        Ok(ExperimentConfig {
            manifold,
            n_values,
            trials,
            master_seed,
            epsilon_rule: EpsilonRule::PaperDefault,
            k,
            filter: FilterSpec::heat(1.0),
            signal,
            eval_points: 20,
            fdt_alpha: 0.5,
            fdt_gamma: 0.5,
            allow_truncation: false,
        })
    }
}

/// One measurement row of an experiment report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub theorem_id: String,
    pub n: usize,
    pub epsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Per-trial error records plus the fitted log-log convergence slope of the
/// experiment's primary metric.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub theorem_id: String,
    pub primary_metric: String,
    pub rows: Vec<ReportRow>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
}

impl ExperimentReport {
    /// Median over trials of one metric, per n (ascending n order).
    pub fn per_n_medians(&self, metric: &str) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.n)
            .collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.metric == metric && r.n == n)
                    .map(|r| r.value)
                    .collect();
                (n, median(&vals))
            })
            .collect()
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut m: Vec<String> = self.rows.iter().map(|r| r.metric.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    /// CSV with fixed header and 17-significant-digit floats.
    pub fn to_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "theorem_id,n,epsilon,trial,seed,metric,value")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.theorem_id,
                r.n,
                fmt_f64(r.epsilon),
                r.trial,
                r.seed,
                r.metric,
                fmt_f64(r.value)
            )?;
        }
        Ok(())
    }

    /// JSON summary: fitted slope/intercept plus per-n medians of every
    /// metric, in deterministic order.
    pub fn summary_json(&self) -> Result<String> {
        let mut medians = Vec::new();
        for metric in self.metrics() {
            for (n, med) in self.per_n_medians(&metric) {
                medians.push(serde_json::json!({
                    "metric": metric,
                    "n": n,
                    "median": med,
                }));
            }
        }
        let v = serde_json::json!({
            "theorem_id": self.theorem_id,
            "primary_metric": self.primary_metric,
            "slope": self.fitted_slope,
            "intercept": self.fitted_intercept,
            "per_n_medians": medians,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// OLS fit of log(median error) on log(n) for one metric. Non-positive
/// medians are excluded; at least two points must remain.
pub fn fit_rate(report: &ExperimentReport, metric: &str) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = report
        .per_n_medians(metric)
        .into_iter()
        .filter(|&(_, m)| m > 0.0 && m.is_finite())
        .map(|(n, m)| ((n as f64).ln(), m.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} usable medians for metric '{metric}'",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InsufficientData("degenerate n grid".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((slope, intercept))
}

fn finish_report(
    theorem_id: &str,
    primary_metric: &str,
    rows: Vec<ReportRow>,
) -> ExperimentReport {
    let mut report = ExperimentReport {
        theorem_id: theorem_id.to_string(),
        primary_metric: primary_metric.to_string(),
        rows,
        fitted_slope: f64::NAN,
        fitted_intercept: f64::NAN,
    };
    if let Ok((slope, intercept)) = fit_rate(&report, primary_metric) {
        report.fitted_slope = slope;
        report.fitted_intercept = intercept;
    }
    report
}

/// Pointwise operator consistency: compares the extended graph Laplacian
/// against the analytic identity `L phi_i = lambda_i phi_i` at random sample
/// points, for each eigenpair below the spectral depth.
pub fn thm1_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let spectrum = lb_spectrum(&cfg.manifold, cfg.k)?;
    let modes: Vec<ManifoldSignal> = (0..cfg.k)
        .map(|i| ManifoldSignal::eigenmode(&spectrum, i))
        .collect::<Result<_>>()?;
    let d = cfg.manifold.intrinsic_dim();

    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let eps = cfg.epsilon_rule.epsilon(n, d);
        let trial_rows: Vec<Vec<ReportRow>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<Vec<ReportRow>> {
                let seed = derive_seed(cfg.master_seed, n as u64, trial as u64);
                let cloud = sample_uniform(&cfg.manifold, n, derive_substream(seed, TAG_CLOUD))?;
                let mut rng = rng_from_seed(derive_substream(seed, TAG_EVAL));
                let mut idx: Vec<usize> = (0..n).collect();
                // partial Fisher-Yates for eval_points distinct indices
                let picks = cfg.eval_points.min(n);
                for i in 0..picks {
                    let j = rng.gen_range(i..n);
                    idx.swap(i, j);
                }

                let mut errs = Vec::with_capacity(picks * cfg.k);
                for (i, phi) in modes.iter().enumerate() {
                    let lambda = spectrum.entries[i].eigenvalue;
                    for &p in &idx[..picks] {
                        let x = cloud.point(p);
                        let lhs = discrete_laplacian_at(phi, x, &cloud, eps)?;
                        let rhs = lambda * phi.eval(x);
                        errs.push((lhs - rhs).abs());
                    }
                }
                let max_err = errs.iter().fold(0.0f64, |a, &b| a.max(b));
                let med_err = median(&errs);
                Ok(vec![
                    row("thm1", n, eps, trial, seed, "thm1_err", max_err),
                    row("thm1", n, eps, trial, seed, "thm1_err_median", med_err),
                ])
            })
            .collect::<Result<_>>()?;
        rows.extend(trial_rows.into_iter().flatten());
    }
    Ok(finish_report("thm1", "thm1_err", rows))
}

fn row(
    theorem_id: &str,
    n: usize,
    epsilon: f64,
    trial: usize,
    seed: u64,
    metric: &str,
    value: f64,
) -> ReportRow {
    ReportRow {
        theorem_id: theorem_id.to_string(),
        n,
        epsilon,
        trial,
        seed,
        metric: metric.to_string(),
        value,
    }
}

/// Spectrum convergence: eigenvalue and (subspace-aligned) eigenfunction
/// errors between the kernel graph Laplacian and the analytic spectrum.
pub fn thm2_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    // one extra analytic eigenvalue for the trailing eigengap
    let analytic = lb_spectrum(&cfg.manifold, cfg.k + 1)?;
    let d = cfg.manifold.intrinsic_dim();

    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let eps = cfg.epsilon_rule.epsilon(n, d);
        let trial_rows: Vec<Vec<ReportRow>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<Vec<ReportRow>> {
                let seed = derive_seed(cfg.master_seed, n as u64, trial as u64);
                let cloud = sample_uniform(&cfg.manifold, n, derive_substream(seed, TAG_CLOUD))?;
                let graph = build_graph(&cloud, eps, DistanceMetric::Euclidean, None)?;
                let spec = eig_sym_auto(&graph.laplacian, 1e-12)?;
                let gn = gn_normalize(spec)?;
                let alignment = align_eigenpairs(&gn, &analytic, &cloud, cfg.k)?;
                Ok(vec![
                    row(
                        "thm2",
                        n,
                        eps,
                        trial,
                        seed,
                        "lambda_err",
                        alignment.max_lambda_error(),
                    ),
                    row(
                        "thm2",
                        n,
                        eps,
                        trial,
                        seed,
                        "phi_err",
                        alignment.max_eigenfunction_error(),
                    ),
                    row(
                        "thm2",
                        n,
                        eps,
                        trial,
                        seed,
                        "lambda0_err",
                        alignment.rows[0].lambda_abs_error,
                    ),
                ])
            })
            .collect::<Result<_>>()?;
        rows.extend(trial_rows.into_iter().flatten());
    }
    Ok(finish_report("thm2", "lambda_err", rows))
}

/// Filtering convergence: L2(Gn) distance between the graph-filtered sampled
/// signal and the sampled manifold-filtered signal, with the filter's FDT
/// report and Lipschitz estimate recorded alongside.
pub fn thm3_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    cfg.filter.as_response()?;
    let analytic = lb_spectrum(&cfg.manifold, cfg.k)?;
    match cfg.signal.band_limit {
        Some(b) if b <= cfg.k => {}
        _ if cfg.allow_truncation => {}
        _ => {
            return Err(Error::TruncationRefused(format!(
                "signal '{}' is not band-limited within K = {}",
                cfg.signal.description, cfg.k
            )))
        }
    }
    let d = cfg.manifold.intrinsic_dim();

    // manifold side is sample-independent: exact coefficients, no quadrature
    let filtered = manifold_filter_apply(
        &cfg.filter,
        &cfg.signal,
        &analytic,
        cfg.k,
        10_000,
        derive_substream(cfg.master_seed, 77),
        cfg.allow_truncation,
    )?;

    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let eps = cfg.epsilon_rule.epsilon(n, d);
        let trial_rows: Vec<Vec<ReportRow>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<Vec<ReportRow>> {
                let seed = derive_seed(cfg.master_seed, n as u64, trial as u64);
                let cloud = Arc::new(sample_uniform(
                    &cfg.manifold,
                    n,
                    derive_substream(seed, TAG_CLOUD),
                )?);
                let graph = build_graph(&cloud, eps, DistanceMetric::Euclidean, None)?;
                let spec = eig_sym_auto(&graph.laplacian, 1e-12)?;
                let gn = gn_normalize(spec)?;

                let sampled_f = sample_operator(&cfg.signal, &cloud)?;
                let graph_side = spectral_filter_apply(&gn, &cfg.filter, &sampled_f)?;
                let manifold_side = sample_operator(&filtered, &cloud)?;

                let diff: Vec<f64> = graph_side
                    .values
                    .iter()
                    .zip(manifold_side.values.iter())
                    .map(|(a, b)| a - b)
                    .collect();
                let err = crate::spectral::gn_norm_slice(&diff);

                // eigenvalues clamped at zero: the kernel mode carries
                // O(1e-15) floating-point noise
                let clamped: Vec<f64> = gn.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
                let fdt = fdt_check(&cfg.filter, &clamped, cfg.fdt_alpha, cfg.fdt_gamma)?;
                let lam_max = clamped.last().copied().unwrap_or(1.0).max(1e-6);
                let lip = lipschitz_constant(&cfg.filter, 0.0, lam_max, 10_000)?;

                Ok(vec![
                    row("thm3", n, eps, trial, seed, "thm3_err", err),
                    row(
                        "thm3",
                        n,
                        eps,
                        trial,
                        seed,
                        "fdt_gamma_max",
                        fdt.max_variation(),
                    ),
                    row(
                        "thm3",
                        n,
                        eps,
                        trial,
                        seed,
                        "fdt_groups",
                        fdt.partition.group_count() as f64,
                    ),
                    row("thm3", n, eps, trial, seed, "lipschitz_est", lip),
                ])
            })
            .collect::<Result<_>>()?;
        rows.extend(trial_rows.into_iter().flatten());
    }
    Ok(finish_report("thm3", "thm3_err", rows))
}

/// Both sides of the two spectral perturbation inequalities, evaluated
/// numerically for a pair of symmetric matrices at index `i`.
#[derive(Debug, Clone)]
pub struct LemmaCheck {
    /// `min_a ||a u_i - w_i||` vs `2 ||B u_i - A u_i|| / min_{j != i} |lambda_j(B) - lambda_i(A)|`.
    pub lhs_eigfun: f64,
    pub rhs_eigfun: f64,
    /// `|lambda_i(A) - lambda_i(B)|` vs `||(A - B) u_i|| / |<u_i, w_i>|`.
    pub lhs_eigval: f64,
    pub rhs_eigval: f64,
    pub eigfun_holds: bool,
    pub eigval_holds: bool,
}

/// Evaluates both lemma inequalities for symmetric `a`, `b` at eigenindex `i`.
pub fn lemma_bound_check(a: &Array2<f64>, b: &Array2<f64>, i: usize) -> Result<LemmaCheck> {
    let n = linalg::check_symmetric(a, 1e-12)?;
    if linalg::check_symmetric(b, 1e-12)? != n {
        return Err(Error::invalid("matrices must have equal size"));
    }
    if i >= n {
        return Err(Error::invalid(format!("index {i} out of range for n = {n}")));
    }
    let sa = eig_sym_auto(a, 1e-12)?;
    let sb = eig_sym_auto(b, 1e-12)?;
    let u = sa.vector(i);
    let w = sb.vector(i);

    let gap = sb
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &l)| (l - sa.eigenvalues[i]).abs())
        .fold(f64::INFINITY, f64::min);
    if !gap.is_finite() || gap < 1e-12 {
        return Err(Error::DegenerateCase(format!(
            "eigengap {gap:.3e} too small at index {i}"
        )));
    }

    let bu = b.dot(&u);
    let au = a.dot(&u);
    let op_diff = (&bu - &au).iter().map(|x| x * x).sum::<f64>().sqrt();
    let plus = (&u - &w).iter().map(|x| x * x).sum::<f64>().sqrt();
    let minus = u
        .iter()
        .zip(w.iter())
        .map(|(x, y)| (-x - y) * (-x - y))
        .sum::<f64>()
        .sqrt();
    let lhs_eigfun = plus.min(minus);
    let rhs_eigfun = 2.0 * op_diff / gap;

    let overlap = u.dot(&w).abs();
    if overlap < 1e-12 {
        return Err(Error::DegenerateCase(format!(
            "eigenvector overlap {overlap:.3e} too small at index {i}"
        )));
    }
    let lhs_eigval = (sa.eigenvalues[i] - sb.eigenvalues[i]).abs();
    let amb = a - b;
    let rhs_eigval = amb.dot(&u).iter().map(|x| x * x).sum::<f64>().sqrt() / overlap;

    Ok(LemmaCheck {
        lhs_eigfun,
        rhs_eigfun,
        lhs_eigval,
        rhs_eigval,
        eigfun_holds: lhs_eigfun <= rhs_eigfun,
        eigval_holds: lhs_eigval <= rhs_eigval,
    })
}

/// Outcome of a random-pair sweep of the lemma checks.
#[derive(Debug, Clone, Default)]
pub struct LemmaSweep {
    pub total: usize,
    pub degenerate: usize,
    pub eigfun_holds: usize,
    pub eigval_holds: usize,
}

impl LemmaSweep {
    pub fn non_degenerate(&self) -> usize {
        self.total - self.degenerate
    }
}

/// Checks both lemmas over `pairs` random symmetric matrices `A` and
/// `B = A + perturb * R`, with a random index per pair.
pub fn lemma_sweep(pairs: usize, dim: usize, perturb: f64, seed: u64) -> Result<LemmaSweep> {
    if dim < 2 {
        return Err(Error::invalid("dimension must be at least 2"));
    }
    let mut rng = rng_from_seed(seed);
    let mut sweep = LemmaSweep::default();
    for _ in 0..pairs {
        let mut a = Array2::<f64>::zeros((dim, dim));
        let mut r = Array2::<f64>::zeros((dim, dim));
        for i in 0..dim {
            for j in i..dim {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
                let p: f64 = rng.gen_range(-1.0..1.0);
                r[(i, j)] = p;
                r[(j, i)] = p;
            }
        }
        let b = &a + &(&r * perturb);
        let i = rng.gen_range(0..dim);
        sweep.total += 1;
        match lemma_bound_check(&a, &b, i) {
            Ok(check) => {
                if check.eigfun_holds {
                    sweep.eigfun_holds += 1;
                }
                if check.eigval_holds {
                    sweep.eigval_holds += 1;
                }
            }
            Err(Error::DegenerateCase(_)) => sweep.degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(sweep)
}
