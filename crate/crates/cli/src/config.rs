//! Run configuration: JSON file, command-line overrides, defaults.

use std::path::{Path, PathBuf};

use agroyield_core::pipeline::ModelSettings;
use agroyield_core::synthgen::GenConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SEED_ENV: &str = "AGROYIELD_SEED";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config field `{field}`: {message}")]
    InvalidField { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidField {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Everything a run needs. `generate.seed` and the seeds inside `models`
/// are ignored; all of them derive from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub train_ratio: f64,
    pub generate: GenConfig,
    pub models: ModelSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: None,
            data: None,
            out: None,
            responses: None,
            train_ratio: 0.8,
            generate: GenConfig::default(),
            models: ModelSettings::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(invalid("train_ratio", format!("{} is not in (0, 1)", self.train_ratio)));
        }
        self.generate
            .validate()
            .map_err(|e| invalid("generate", e.to_string()))?;
        let dnn = &self.models.dnn;
        if dnn.hidden_layers.is_empty() || dnn.hidden_layers.contains(&0) {
            return Err(invalid("models.dnn.hidden_layers", "need at least one non-empty hidden layer"));
        }
        dnn.train
            .validate()
            .map_err(|e| invalid("models.dnn.train", e.to_string()))?;
        let forest = &self.models.forest;
        if forest.n_trees == 0 {
            return Err(invalid("models.forest.n_trees", "must be at least 1"));
        }
        if forest.features_per_split == 0 || forest.features_per_split > agroyield_core::NUM_FEATURES {
            return Err(invalid("models.forest.features_per_split", "must be in [1, 46]"));
        }
        if forest.min_leaf == 0 {
            return Err(invalid("models.forest.min_leaf", "must be at least 1"));
        }
        let svm = &self.models.svm;
        if !(svm.epsilon > 0.0 && svm.c >= 0.0 && svm.learning_rate > 0.0) {
            return Err(invalid("models.svm", "needs epsilon > 0, c >= 0, learning_rate > 0"));
        }
        if !(self.models.logistic.learning_rate > 0.0) {
            return Err(invalid("models.logistic.learning_rate", "must be > 0"));
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let config: Config = serde_json::from_str(text).map_err(|e| ConfigError::Malformed {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Values given on the command line; each one beats the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub n: Option<usize>,
    pub ratio: Option<f64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub trees: Option<usize>,
}

/// Seed precedence: flag, then config file, then the environment, then
/// [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
    if let Some(seed) = flag.or(file) {
        return Ok(seed);
    }
    match env {
        Some(raw) => raw
            .trim()
            .parse()
            .map_err(|_| invalid(SEED_ENV, format!("{raw:?} is not an unsigned integer"))),
        None => Ok(DEFAULT_SEED),
    }
}

impl Config {
    /// Applies flag values, fixes the seed and re-validates.
    pub fn resolve(mut self, flags: &Overrides, env_seed: Option<&str>) -> Result<Config, ConfigError> {
        self.seed = Some(resolve_seed(flags.seed, self.seed, env_seed)?);
        if flags.data.is_some() {
            self.data = flags.data.clone();
        }
        if flags.out.is_some() {
            self.out = flags.out.clone();
        }
        if flags.responses.is_some() {
            self.responses = flags.responses.clone();
        }
        if let Some(n) = flags.n {
            self.generate.n_records = n;
        }
        if let Some(ratio) = flags.ratio {
            self.train_ratio = ratio;
        }
        if let Some(epochs) = flags.epochs {
            self.models.dnn.train.max_epochs = epochs;
        }
        if let Some(lr) = flags.lr {
            self.models.dnn.train.learning_rate = lr;
        }
        if let Some(trees) = flags.trees {
            self.models.forest.n_trees = trees;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
