//! Run manifests: the fully resolved configuration of every run, written
//! alongside its outputs so the run can be replayed byte-identically.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use mflab::filters::FilterSpec;
use mflab::manifold::ManifoldSpec;
use mflab::navigation::NavMap;

use crate::nav::NavModelFile;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: ManifestCommand,
    pub master_seed: u64,
    /// Output file names, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestCommand {
    Thm(ThmManifest),
    NavTrain(NavTrainManifest),
    NavEval(NavEvalManifest),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThmManifest {
    pub theorem: u8,
    pub manifold: ManifoldSpec,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub k: usize,
    pub filter: FilterSpec,
    pub epsilon: Option<f64>,
    pub signal_mode: usize,
    pub eval_points: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// CSV file name (the summary name derives from it).
    pub csv_name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavTrainManifest {
    pub map: NavMap,
    pub n: usize,
    pub seed: u64,
    pub layers: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub trajectories: usize,
    pub model_name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavEvalManifest {
    /// The trained model inlined, so the manifest is self-contained.
    pub model: NavModelFile,
    pub tests: usize,
    pub seed: u64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let path = dir.join(format!("{stem}.manifest.json"));
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// A timer plus output registry; turned into a manifest when the run ends.
pub struct RunRecorder {
    started: Instant,
    outputs: Vec<String>,
}

impl RunRecorder {
    pub fn start() -> Self {
        RunRecorder {
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn finish(self, command: ManifestCommand, master_seed: u64) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            master_seed,
            outputs: self.outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Re-runs the experiment a manifest describes, writing the same output
/// names into `out_dir` (or the manifest's own directory).
pub fn replay(manifest_path: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text).context("parsing manifest")?;
    let dir = match out_dir {
        Some(d) => d,
        None => manifest_path
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir)?;
    match manifest.command {
        ManifestCommand::Thm(m) => crate::thm::execute(&m, &dir).map(|_| ()),
        ManifestCommand::NavTrain(m) => crate::nav::execute_train(&m, &dir).map(|_| ()),
        ManifestCommand::NavEval(m) => crate::nav::execute_eval(&m, &dir).map(|_| ()),
    }
}
