//! The run configuration: one TOML file shared by every subcommand.
//!
//! Precedence is built-in defaults, then the file, then command-line flags.

use std::path::{Path, PathBuf};

use fairsvdd::{SynthSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Directory that receives every file a command writes. Default `out`.
    pub out_dir: PathBuf,
    /// Training CSV. Default `<out_dir>/train.csv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_data: Option<PathBuf>,
    /// Evaluation CSV. Default `<out_dir>/test.csv`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_data: Option<PathBuf>,
    /// Checkpoint written by `train` and read by `evaluate`. Default
    /// `<out_dir>/model.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// PSV column name. Default `psv`.
    pub psv_col: String,
    /// Label column name, used when present in a file. Default `label`.
    pub label_col: String,
    /// Train Deep Fair SVDD instead of plain Deep SVDD. Default `false`.
    pub fair: bool,
    /// Downsample the larger PSV group of the training set. Default `false`.
    pub balanced: bool,
    /// Flag this many top-scoring instances. Default: the number of abnormal labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_anomalies: Option<usize>,
    /// Flag scores strictly above this value; takes precedence over `k_anomalies`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// λ values for `sweep`. Default `[0.01, 0.1, 1, 10, 100]`.
    pub lambdas: Vec<f64>,
    pub synth: SynthSpec,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("out"),
            train_data: None,
            test_data: None,
            model: None,
            psv_col: "psv".into(),
            label_col: "label".into(),
            fair: false,
            balanced: false,
            k_anomalies: None,
            threshold: None,
            lambdas: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            synth: SynthSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let wrap = |e: fairsvdd::Error| CliError::Config(e.to_string());
        self.synth.validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)?;
        if self.lambdas.is_empty() {
            return Err(CliError::Config("lambdas must not be empty".into()));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(CliError::Config("lambdas must be finite and non-negative".into()));
        }
        if matches!(self.threshold, Some(t) if !t.is_finite()) {
            return Err(CliError::Config("threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn train_path(&self) -> PathBuf {
        self.train_data.clone().unwrap_or_else(|| self.out_dir.join("train.csv"))
    }

    pub fn test_path(&self) -> PathBuf {
        self.test_data.clone().unwrap_or_else(|| self.out_dir.join("test.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out_dir.join("model.json"))
    }
}
