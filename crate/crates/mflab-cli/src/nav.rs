//! Navigation pipeline: train a graph filter on shortest-path labels, then
//! evaluate rollout success counts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mflab::navigation::{
    build_nav_graph, default_map, dijkstra_labels, evaluate, nav_default_epsilon,
    sample_free_space, train_filter, training_gso, FilterNet, FilterNetParams, NavMap,
    RolloutConfig,
};
use mflab::report::fmt_f64;
use mflab::rng::derive_substream;

use crate::manifest::{ManifestCommand, NavEvalManifest, NavTrainManifest, RunRecorder};
use crate::NavCommonArgs;

/// Paper reference success counts (out of 100) for the layered filters.
pub const REFERENCE_SUCCESS: [(&str, usize, usize); 2] =
    [("1-layer", 74, 75), ("2-layer", 79, 84)];

/// Everything needed to rebuild the trained model and its graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavModelFile {
    pub map: NavMap,
    pub n: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub layers: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub trajectories: usize,
    pub final_loss: f64,
    pub params: FilterNetParams,
}

fn resolve_map(common: &NavCommonArgs) -> Result<NavMap> {
    if common.map_source.default_map {
        return Ok(default_map());
    }
    match &common.map_source.map {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading map {}", path.display()))?;
            let map: NavMap = serde_json::from_str(&text).context("parsing map JSON")?;
            map.validate()?;
            Ok(map)
        }
        None => bail!("either --map or --default-map is required"),
    }
}

pub fn train(
    common: NavCommonArgs,
    layers: usize,
    hidden: usize,
    epochs: usize,
    lr: f64,
    trajectories: usize,
    model: Option<PathBuf>,
) -> Result<()> {
    if !(layers == 1 || layers == 2) {
        bail!("--layers must be 1 or 2");
    }
    let map = resolve_map(&common)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    let model_name = match &model {
        Some(p) => p
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model.json".into()),
        None => format!("nav_model_{}l_{}.json", layers, common.seed),
    };

    let spec = NavTrainManifest {
        map,
        n: common.n,
        seed: common.seed,
        layers,
        hidden,
        epochs,
        lr,
        trajectories,
        model_name,
    };
    let (file, labeled) = execute_train(&spec, &dir)?;
    println!(
        "trained {}-layer filter on {} labeled nodes; final loss {:.6e}",
        spec.layers, labeled, file.final_loss
    );
    println!("model: {}", dir.join(&spec.model_name).display());
    Ok(())
}

/// Trains per the manifest and writes model JSON, loss CSV, dataset CSV and
/// the manifest into `dir`. Returns the model file and the label count.
pub fn execute_train(spec: &NavTrainManifest, dir: &Path) -> Result<(NavModelFile, usize)> {
    let mut recorder = RunRecorder::start();
    let cloud = Arc::new(sample_free_space(&spec.map, spec.n, spec.seed)?);
    let epsilon = nav_default_epsilon(&spec.map, spec.n);
    let graph = build_nav_graph(&spec.map, &cloud, epsilon)?;
    let gso = Arc::new(training_gso(&graph.adjacency)?);
    let data = dijkstra_labels(
        &graph,
        &cloud,
        &spec.map,
        spec.trajectories,
        derive_substream(spec.seed, 1),
    )?;

    let arch = match spec.layers {
        1 => FilterNet::one_layer(Arc::clone(&gso), 0)?,
        2 => FilterNet::two_layer(Arc::clone(&gso), spec.hidden, 0)?,
        other => bail!("unsupported layer count {other}"),
    };
    let outcome = train_filter(
        &arch,
        &data,
        spec.epochs,
        spec.lr,
        derive_substream(spec.seed, 2),
    )?;
    let final_loss = outcome.loss_history.last().copied().unwrap_or(f64::NAN);

    let file = NavModelFile {
        map: spec.map.clone(),
        n: spec.n,
        seed: spec.seed,
        epsilon,
        layers: spec.layers,
        hidden: spec.hidden,
        epochs: spec.epochs,
        lr: spec.lr,
        trajectories: spec.trajectories,
        final_loss,
        params: outcome.model.to_params(),
    };
    std::fs::write(dir.join(&spec.model_name), serde_json::to_string_pretty(&file)?)?;
    recorder.add_output(spec.model_name.clone());

    let stem = spec.model_name.trim_end_matches(".json").to_string();
    let loss_name = format!("{stem}.loss.csv");
    let mut loss_csv = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_history.iter().enumerate() {
        loss_csv.push_str(&format!("{e},{}\n", fmt_f64(*l)));
    }
    std::fs::write(dir.join(&loss_name), loss_csv)?;
    recorder.add_output(loss_name);

    let data_name = format!("{stem}.labels.csv");
    let mut buf = Vec::new();
    data.to_csv(&mut buf)?;
    std::fs::write(dir.join(&data_name), buf)?;
    recorder.add_output(data_name);

    let labeled = data.labeled_indices.len();
    let manifest = recorder.finish(ManifestCommand::NavTrain(spec.clone()), spec.seed);
    manifest.write(dir, &stem)?;
    Ok((file, labeled))
}

pub fn eval(model_path: PathBuf, tests: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(&model_path)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let model: NavModelFile = serde_json::from_str(&text).context("parsing model JSON")?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;

    let spec = NavEvalManifest { model, tests, seed };
    let successes = execute_eval(&spec, &dir)?;

    println!(
        "reference success counts: 1-layer {}/{} (n=413/1117), 2-layer {}/{}",
        REFERENCE_SUCCESS[0].1, REFERENCE_SUCCESS[0].2, REFERENCE_SUCCESS[1].1, REFERENCE_SUCCESS[1].2
    );
    println!(
        "{}-layer graph filter, n={}: successful trajectories out of {}:",
        spec.model.layers, spec.model.n, spec.tests
    );
    println!("{successes}");
    Ok(())
}

/// Rebuilds the recorded graph, evaluates the stored model and writes a
/// results JSON plus the manifest into `dir`.
pub fn execute_eval(spec: &NavEvalManifest, dir: &Path) -> Result<usize> {
    let mut recorder = RunRecorder::start();
    let m = &spec.model;
    let cloud = sample_free_space(&m.map, m.n, m.seed)?;
    let graph = build_nav_graph(&m.map, &cloud, m.epsilon)?;
    let gso = Arc::new(training_gso(&graph.adjacency)?);
    let net = FilterNet::from_params(gso, &m.params)?;
    let successes = evaluate(
        &net,
        &m.map,
        &cloud,
        spec.tests,
        spec.seed,
        &RolloutConfig::default(),
    )?;

    let results_name = format!("nav_eval_{}l_{}_{}.json", m.layers, m.n, spec.seed);
    let results = serde_json::json!({
        "layers": m.layers,
        "n": m.n,
        "tests": spec.tests,
        "seed": spec.seed,
        "successes": successes,
        "reference_table": {
            "1-layer": {"n413": REFERENCE_SUCCESS[0].1, "n1117": REFERENCE_SUCCESS[0].2},
            "2-layer": {"n413": REFERENCE_SUCCESS[1].1, "n1117": REFERENCE_SUCCESS[1].2},
        },
    });
    std::fs::write(dir.join(&results_name), serde_json::to_string_pretty(&results)?)?;
    recorder.add_output(results_name.clone());

    let stem = results_name.trim_end_matches(".json").to_string();
    let manifest = recorder.finish(ManifestCommand::NavEval(spec.clone()), spec.seed);
    manifest.write(dir, &stem)?;
    Ok(successes)
}
