use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::data::{ingest_csv, synth_regression, Dataset, RegressionSpec};
use crate::explainers::{Method, MethodParams, WachterParams};
use crate::impute::{ImputerKind, ImputerParams};
use crate::model::TrainConfig;

fn half() -> f64 {
    0.5
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    /// A headed CSV; `path` is resolved against the config file's directory.
    Csv {
        path: PathBuf,
        target: String,
        #[serde(default = "half")]
        threshold: f64,
    },
    /// A generated regression table with target column `target`.
    Synthetic {
        spec: RegressionSpec,
        #[serde(default = "half")]
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

/// A loaded dataset and the number of raw rows dropped on the way in.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

impl DatasetConfig {
    pub fn load(&self, base: &Path) -> Result<Loaded, HarnessError> {
        match &self.source {
            DatasetSource::Csv { path, target, threshold } => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let ing = ingest_csv(&path, target, *threshold)?;
                Ok(Loaded { dataset: ing.dataset, dropped_rows: ing.dropped_rows })
            }
            DatasetSource::Synthetic { spec, threshold } => {
                let dataset = synth_regression(spec)?.into_dataset("target", *threshold)?;
                Ok(Loaded { dataset, dropped_rows: 0 })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    pub master: u64,
    /// Repetition `r` runs the whole pipeline with seed `master + r`.
    pub repetitions: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig { master: 0, repetitions: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetConfig>,
    pub n_batch: usize,
    pub m_values: Vec<usize>,
    pub imputers: Vec<ImputerKind>,
    pub imputer_params: ImputerParams,
    pub methods: Vec<Method>,
    pub params: MethodParams,
    pub armin_mice_only: bool,
    /// The training seed is replaced by each repetition's seed.
    pub model: TrainConfig,
    pub seeds: SeedConfig,
    pub output_dir: PathBuf,
    /// Fill `runtime_ms`; off by default so reruns are byte-identical.
    pub record_timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            datasets: Vec::new(),
            n_batch: 100,
            m_values: vec![1, 2, 3],
            imputers: ImputerKind::ALL.to_vec(),
            imputer_params: ImputerParams::default(),
            methods: Method::ALL.to_vec(),
            params: MethodParams::default(),
            armin_mice_only: true,
            model: TrainConfig::default(),
            seeds: SeedConfig::default(),
            output_dir: PathBuf::from("results"),
            record_timings: false,
        }
    }
}

fn config_error(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

/// Directory that relative paths inside a config file are resolved against.
pub fn config_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl BenchConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let cfg: BenchConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.datasets.is_empty() {
            return Err(config_error("no datasets configured"));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_error("dataset names must be unique"));
        }
        if self.n_batch == 0 {
            return Err(config_error("n_batch must be at least 1"));
        }
        if self.m_values.is_empty() || self.imputers.is_empty() || self.methods.is_empty() {
            return Err(config_error("m_values, imputers and methods must be non-empty"));
        }
        if self.seeds.repetitions == 0 {
            return Err(config_error("repetitions must be at least 1"));
        }
        if self.model.hidden_width == 0 || self.model.batch_size == 0 || !(self.model.step_size > 0.0) {
            return Err(config_error(format!("invalid model config {:?}", self.model)));
        }
        self.params.validate().map_err(|e| config_error(e.to_string()))
    }

    /// Row count the bench will produce for datasets with `n_features`
    /// columns each.
    pub fn expected_rows(&self) -> usize {
        let per_setup: usize = self
            .imputers
            .iter()
            .map(|&imp| {
                self.methods
                    .iter()
                    .filter(|&&m| !(m == Method::Armin && self.armin_mice_only && imp != ImputerKind::Mice))
                    .count()
            })
            .sum();
        self.datasets.len() * self.seeds.repetitions * self.m_values.len() * per_setup
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Lr,
    Eps,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lr => "lr",
            SweepAxis::Eps => "eps",
        }
    }

    /// `base` with this axis set to `x` and λ set to `lambda`.
    pub fn apply(self, base: WachterParams, x: f64, lambda: f64) -> WachterParams {
        match self {
            SweepAxis::Lr => WachterParams { lr: x, lambda, ..base },
            SweepAxis::Eps => WachterParams { eps: x, lambda, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub dataset: Option<DatasetConfig>,
    pub axis_x: SweepAxis,
    pub grid_x: Vec<f64>,
    /// Values of λ.
    pub grid_y: Vec<f64>,
    /// Parameters not on either axis.
    pub fixed: WachterParams,
    pub imputer: ImputerKind,
    pub imputer_params: ImputerParams,
    pub m: usize,
    pub n_batch: usize,
    pub model: TrainConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            dataset: None,
            axis_x: SweepAxis::Lr,
            grid_x: vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2],
            grid_y: vec![0.8, 0.85, 0.9, 0.95, 1.0],
            fixed: WachterParams::default(),
            imputer: ImputerKind::Knn,
            imputer_params: ImputerParams::default(),
            m: 2,
            n_batch: 100,
            model: TrainConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl SweepConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let cfg: SweepConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default ε grid, reaching past 0.5.
    pub fn eps_grid() -> Vec<f64> {
        vec![0.001, 0.01, 0.05, 0.1, 0.25, 0.5]
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.dataset.is_none() {
            return Err(config_error("sweep needs a dataset"));
        }
        if self.grid_x.is_empty() || self.grid_y.is_empty() {
            return Err(config_error("sweep grids must be non-empty"));
        }
        if self.grid_x.iter().any(|&v| !(v > 0.0)) {
            return Err(config_error(format!("{} values must be positive", self.axis_x.name())));
        }
        if self.grid_y.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(config_error("lambda values must lie in [0, 1]"));
        }
        if self.n_batch == 0 {
            return Err(config_error("n_batch must be at least 1"));
        }
        self.fixed.validate().map_err(|e| config_error(e.to_string()))
    }
}
