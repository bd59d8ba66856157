//! Command-line driver for the manifold-filtering experiments.
//!
//! Every run writes its outputs next to a `run_manifest.json` capturing the
//! fully resolved configuration; `mflab replay` re-executes a manifest and
//! reproduces the outputs byte for byte.

mod manifest;
mod nav;
mod thm;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "mflab",
    version,
    about = "Kernel-graph spectral filtering experiments with analytic ground truth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ManifoldArg {
    Circle,
    Torus2,
}

#[derive(Debug, Clone, clap::Args)]
struct ThmArgs {
    /// Manifold kind
    #[arg(long, value_enum, default_value = "circle")]
    manifold: ManifoldArg,
    /// Circle radius or torus side length
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Comma-separated ascending sample counts
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    n: Vec<usize>,
    /// Trials per sample count
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Master seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Spectral depth
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Filter as JSON, e.g. {"form":"response","family":"heat","tau":1.0}
    #[arg(long)]
    filter: Option<String>,
    /// Kernel bandwidth; defaults to n^{-1/(d+4)}
    #[arg(long)]
    epsilon: Option<f64>,
    /// Analytic eigenmode index used as the band-limited signal
    #[arg(long, default_value_t = 1)]
    signal_mode: usize,
    /// Evaluation points per trial (pointwise experiment)
    #[arg(long, default_value_t = 20)]
    eval_points: usize,
    /// Spectrum partition threshold recorded by the filter experiment
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Variation budget for the same report
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Halve the n grid and the trial count
    #[arg(long)]
    quick: bool,
    /// Output CSV path; default ./out/<thm>_<seed>.csv
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

/// Exactly one map source must be given.
#[derive(Debug, Clone, clap::Args)]
#[group(required = true, multiple = false)]
struct MapSource {
    /// Map JSON path
    #[arg(long)]
    map: Option<std::path::PathBuf>,
    /// Use the built-in map
    #[arg(long)]
    default_map: bool,
}

#[derive(Debug, Clone, clap::Args)]
struct NavCommonArgs {
    #[command(flatten)]
    map_source: MapSource,
    /// Number of free-space samples
    #[arg(long, default_value_t = 413)]
    n: usize,
    /// Master seed
    #[arg(long, default_value_t = 8)]
    seed: u64,
    /// Output directory; default ./out
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise Laplacian consistency experiment
    Thm1(ThmArgs),
    /// Spectrum convergence experiment
    Thm2(ThmArgs),
    /// Filtering convergence experiment
    Thm3(ThmArgs),
    /// Train a navigation graph filter
    NavTrain {
        #[command(flatten)]
        common: NavCommonArgs,
        /// 1 or 2 filter layers
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// Hidden width of the 2-layer model
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        /// Training epochs
        #[arg(long, default_value_t = 3000)]
        epochs: usize,
        /// Learning rate
        #[arg(long, default_value_t = 0.0002)]
        lr: f64,
        /// Shortest-path trajectories to label
        #[arg(long, default_value_t = 4)]
        trajectories: usize,
        /// Model output path; default <out>/model.json
        #[arg(long)]
        model: Option<std::path::PathBuf>,
    },
    /// Evaluate a trained navigation model
    NavEval {
        /// Trained model JSON (from nav-train); carries its map and graph
        #[arg(long, required = true)]
        model: std::path::PathBuf,
        /// Number of rollout tests
        #[arg(long, default_value_t = 100)]
        tests: usize,
        /// Seed for the test starting points
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory; default ./out
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Random-pair sweep of the spectral perturbation inequalities
    Lemmas {
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0.01)]
        perturb: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Re-run an experiment from its manifest
    Replay {
        /// Path to a run_manifest.json
        #[arg(long, required = true)]
        manifest: std::path::PathBuf,
        /// Redirect outputs to this directory
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
}

fn init_thread_pool() {
    if let Ok(var) = std::env::var("MFLAB_THREADS") {
        if let Ok(threads) = var.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Thm1(args) => thm::run(thm::Theorem::One, args),
        Command::Thm2(args) => thm::run(thm::Theorem::Two, args),
        Command::Thm3(args) => thm::run(thm::Theorem::Three, args),
        Command::NavTrain {
            common,
            layers,
            hidden,
            epochs,
            lr,
            trajectories,
            model,
        } => nav::train(common, layers, hidden, epochs, lr, trajectories, model),
        Command::NavEval {
            model,
            tests,
            seed,
            out,
        } => nav::eval(model, tests, seed, out),
        Command::Lemmas {
            pairs,
            dim,
            perturb,
            seed,
        } => run_lemmas(pairs, dim, perturb, seed),
        Command::Replay { manifest, out } => manifest::replay(&manifest, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_lemmas(pairs: usize, dim: usize, perturb: f64, seed: u64) -> anyhow::Result<()> {
    if pairs == 0 {
        println!("lemma1 holds-rate: N/A (0 pairs)");
        println!("lemma2 holds-rate: N/A (0 pairs)");
        return Ok(());
    }
    let sweep = mflab::convergence::lemma_sweep(pairs, dim, perturb, seed)?;
    let nd = sweep.non_degenerate();
    println!(
        "pairs: {} (degenerate skipped: {})",
        sweep.total, sweep.degenerate
    );
    if nd == 0 {
        println!("lemma1 holds-rate: N/A (all degenerate)");
        println!("lemma2 holds-rate: N/A (all degenerate)");
    } else {
        println!(
            "lemma1 holds-rate: {}/{} ({:.2}%)",
            sweep.eigfun_holds,
            nd,
            100.0 * sweep.eigfun_holds as f64 / nd as f64
        );
        println!(
            "lemma2 holds-rate: {}/{} ({:.2}%)",
            sweep.eigval_holds,
            nd,
            100.0 * sweep.eigval_holds as f64 / nd as f64
        );
    }
    Ok(())
}
