//! The JSON run configuration shared by all training commands.

use std::path::{Path, PathBuf};

use anyhow::Context;
use knet::data::{gen_moons, gen_spirals, load_csv, LabeledDataset, DEFAULT_MOON_NOISE, DEFAULT_SPIRAL_NOISE};
use knet::trainer::{PredictMode, SigmaMode, UUpdate};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Moons {
        n: usize,
        #[serde(default = "moon_noise")]
        noise: f64,
        /// Generator seed; the run seed when absent.
        seed: Option<u64>,
    },
    Spirals {
        n: usize,
        #[serde(default = "three")]
        arms: usize,
        #[serde(default = "spiral_noise")]
        noise: f64,
        seed: Option<u64>,
    },
    Csv {
        /// Relative paths resolve against the configuration file's directory.
        path: PathBuf,
        label_column: Option<String>,
    },
}

fn moon_noise() -> f64 {
    DEFAULT_MOON_NOISE
}

fn spiral_noise() -> f64 {
    DEFAULT_SPIRAL_NOISE
}

fn three() -> usize {
    3
}

fn yes() -> bool {
    true
}

fn default_fraction() -> f64 {
    0.25
}

fn default_lambdas() -> Vec<f64> {
    vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 0.0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_kernel_rows() -> usize {
    2000
}

fn default_mode() -> PredictMode {
    PredictMode::NearestCenter
}

fn default_update() -> UUpdate {
    UUpdate::Eig
}

/// Every field except `dataset` is optional. Training fields left out take the
/// library defaults; `c` defaults to the number of label classes, and `sigma`
/// to a fixed bandwidth for the built-in generators and the median pairwise
/// distance otherwise.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Scale every feature to zero mean and unit variance before training.
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Reduce to this many principal components after standardization.
    #[serde(default)]
    pub pca_dim: Option<usize>,
    #[serde(default)]
    pub c: Option<usize>,
    #[serde(default)]
    pub sigma: Option<SigmaMode>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_update")]
    pub u_update: UUpdate,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub max_outer_iters: Option<usize>,
    #[serde(default)]
    pub min_outer_iters: Option<usize>,
    #[serde(default)]
    pub convergence_tol: Option<f64>,
    #[serde(default)]
    pub kmeans_restarts: Option<usize>,
    #[serde(default)]
    pub hidden_width: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Training fraction for `oos`.
    #[serde(default = "default_fraction")]
    pub subsample_fraction: f64,
    #[serde(default = "default_mode")]
    pub predict_mode: PredictMode,
    /// λ values for `sweep-lambda`.
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// `kernel.csv` is thinned to at most this many rows and columns.
    #[serde(default = "default_kernel_rows")]
    pub kernel_max_rows: usize,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn load_dataset(&self) -> anyhow::Result<LabeledDataset> {
        Ok(match &self.dataset {
            DatasetSpec::Moons { n, noise, seed } => gen_moons(*n, *noise, seed.unwrap_or(self.seed))?,
            DatasetSpec::Spirals { n, arms, noise, seed } => gen_spirals(*n, *arms, *noise, seed.unwrap_or(self.seed))?,
            DatasetSpec::Csv { path, label_column } => {
                let path = if path.is_relative() { self.base_dir.join(path) } else { path.clone() };
                load_csv(&path, label_column.as_deref())?
            }
        })
    }
}
