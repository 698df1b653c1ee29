//! The global TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{LeadSelection, PreprocessConfig};
use crate::eval::EvalConfig;
use crate::model::{ModelConfig, Variant};
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Directory of header/payload pairs.
    pub data_dir: PathBuf,
    /// Manifest, splits and cache live here.
    pub work_dir: PathBuf,
    /// Label-map CSV; the shipped nine-class map when absent.
    pub label_map: Option<PathBuf>,
    pub folds: usize,
    pub split_seed: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            work_dir: PathBuf::from("work"),
            label_map: None,
            folds: 10,
            split_seed: 0,
        }
    }
}

impl DataSection {
    pub fn manifest_path(&self) -> PathBuf {
        self.work_dir.join("manifest.csv")
    }

    pub fn holdout_path(&self) -> PathBuf {
        self.work_dir.join("splits_holdout.csv")
    }

    pub fn kfold_path(&self) -> PathBuf {
        self.work_dir.join("splits_kfold.csv")
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.work_dir.join("cache")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Standard,
    Tiny,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub preset: Preset,
    pub variant: Variant,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            preset: Preset::Standard,
            variant: Variant::Full,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data: DataSection,
    pub preprocess: PreprocessConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Config {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// Read a config file. Relative data paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.data.data_dir);
        fix(&mut cfg.data.work_dir);
        if let Some(l) = cfg.data.label_map.as_mut() {
            fix(l);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Command-line overrides; flags win over the file.
    pub fn apply_overrides(&mut self, seed: Option<u64>, leads: Option<usize>, variant: Option<Variant>) {
        if let Some(s) = seed {
            self.train.seed = s;
        }
        match leads {
            Some(1) => self.preprocess.lead_selection = LeadSelection::single(),
            Some(_) => self.preprocess.lead_selection = LeadSelection::All,
            None => {}
        }
        if let Some(v) = variant {
            self.model.variant = v;
        }
    }

    /// Architecture for `leads` input leads and the given class names.
    pub fn model_config(&self, leads: usize, class_names: &[String]) -> ModelConfig {
        let base = match self.model.preset {
            Preset::Standard => ModelConfig::standard(leads),
            Preset::Tiny => ModelConfig::tiny(leads, class_names.len()),
        };
        let mut cfg = base.variant(self.model.variant);
        cfg.num_classes = class_names.len();
        cfg.with_class_names(class_names)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.preprocess
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.data.folds < 2 {
            return Err(ConfigError::Invalid("data.folds must be at least 2".into()));
        }
        if self.eval.shards == 0 || self.eval.batch_size == 0 {
            return Err(ConfigError::Invalid("eval shards and batch_size must be positive".into()));
        }
        Ok(())
    }
}
