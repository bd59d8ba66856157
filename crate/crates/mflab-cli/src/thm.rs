//! The three convergence experiments behind one argument surface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use mflab::convergence::{
    thm1_experiment, thm2_experiment, thm3_experiment, EpsilonRule, ExperimentConfig,
    ExperimentReport,
};
use mflab::filters::FilterSpec;
use mflab::manifold::{lb_spectrum, ManifoldSignal, ManifoldSpec};

use crate::manifest::{ManifestCommand, RunRecorder, ThmManifest};
use crate::{ManifoldArg, ThmArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    One,
    Two,
    Three,
}

impl Theorem {
    fn number(self) -> u8 {
        match self {
            Theorem::One => 1,
            Theorem::Two => 2,
            Theorem::Three => 3,
        }
    }
}

pub fn run(theorem: Theorem, args: ThmArgs) -> Result<()> {
    let manifold = match args.manifold {
        ManifoldArg::Circle => ManifoldSpec::circle(args.scale)?,
        ManifoldArg::Torus2 => ManifoldSpec::flat_torus_2d(args.scale)?,
    };
    let filter: FilterSpec = match &args.filter {
        Some(json) => serde_json::from_str(json).context("parsing --filter JSON")?,
        None => FilterSpec::heat(1.0),
    };

    let mut n_values = args.n.clone();
    let mut trials = args.trials;
    if args.quick {
        n_values = n_values.iter().map(|&n| (n / 2).max(16)).collect();
        trials = (trials / 2).max(1);
    }

    let csv_path = args.out.clone().unwrap_or_else(|| {
        PathBuf::from("out").join(format!("thm{}_{}.csv", theorem.number(), args.seed))
    });
    let dir = csv_path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let csv_name = csv_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report.csv".to_string());

    let spec = ThmManifest {
        theorem: theorem.number(),
        manifold,
        n_values,
        trials,
        seed: args.seed,
        k: args.k,
        filter,
        epsilon: args.epsilon,
        signal_mode: args.signal_mode,
        eval_points: args.eval_points,
        alpha: args.alpha,
        gamma: args.gamma,
        csv_name,
    };
    let report = execute(&spec, &dir)?;

    println!(
        "thm{}: {} rows, primary metric {}",
        spec.theorem,
        report.rows.len(),
        report.primary_metric
    );
    for (n, median) in report.per_n_medians(&report.primary_metric) {
        println!("  n = {n:6}: median {median:.6e}");
    }
    println!("fitted log-log slope: {:.6}", report.fitted_slope);
    Ok(())
}

/// Runs one experiment described by a manifest and writes its outputs (CSV,
/// summary JSON, manifest) into `dir`.
pub fn execute(spec: &ThmManifest, dir: &Path) -> Result<ExperimentReport> {
    let mut recorder = RunRecorder::start();
    let cfg = build_config(spec)?;
    let report = match spec.theorem {
        1 => thm1_experiment(&cfg)?,
        2 => thm2_experiment(&cfg)?,
        3 => thm3_experiment(&cfg)?,
        other => bail!("unknown theorem id {other}"),
    };

    let csv_path = dir.join(&spec.csv_name);
    let mut buf = Vec::new();
    report.to_csv(&mut buf)?;
    std::fs::write(&csv_path, &buf).with_context(|| format!("writing {}", csv_path.display()))?;
    recorder.add_output(spec.csv_name.clone());

    let summary_name = format!(
        "{}.summary.json",
        spec.csv_name.trim_end_matches(".csv")
    );
    let summary_path = dir.join(&summary_name);
    std::fs::write(&summary_path, report.summary_json()?)?;
    recorder.add_output(summary_name);

    let stem = spec.csv_name.trim_end_matches(".csv").to_string();
    let manifest = recorder.finish(ManifestCommand::Thm(spec.clone()), spec.seed);
    manifest.write(dir, &stem)?;
    Ok(report)
}

fn build_config(spec: &ThmManifest) -> Result<ExperimentConfig> {
    if spec.signal_mode >= spec.k {
        bail!(
            "signal mode {} must lie below the spectral depth K = {}",
            spec.signal_mode,
            spec.k
        );
    }
    let analytic = lb_spectrum(&spec.manifold, spec.k.max(spec.signal_mode + 1))?;
    let signal = ManifoldSignal::eigenmode(&analytic, spec.signal_mode)?;
    Ok(ExperimentConfig {
        manifold: spec.manifold,
        n_values: spec.n_values.clone(),
        trials: spec.trials,
        master_seed: spec.seed,
        epsilon_rule: match spec.epsilon {
            Some(e) => EpsilonRule::Fixed(e),
            None => EpsilonRule::PaperDefault,
        },
        k: spec.k,
        filter: spec.filter.clone(),
        signal,
        eval_points: spec.eval_points,
        fdt_alpha: spec.alpha,
        fdt_gamma: spec.gamma,
        allow_truncation: false,
    })
}
