//! Optimization: class weighting, Adam with L2, learning-rate schedules,
//! early stopping, checkpointing and run logs.

mod adam;
mod fit;
mod runlog;
mod schedule;
mod weights;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use fit::{fit, train_epoch, EpochStats, FitOutcome};
pub use runlog::{EpochRecord, RunLog};
pub use schedule::{lr_at, PlateauConfig, PlateauState};
pub use weights::{class_weights, ClassWeightMode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalError;
use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub step_halving_epochs: usize,
    pub plateau: PlateauConfig,
    pub early_stop_patience: usize,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub class_weight_mode: ClassWeightMode,
    pub min_lr: f64,
    pub adam: AdamConfig,
    /// Stop as soon as validation macro-F1 reaches this value.
    pub target_val_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            l2: 1e-3,
            batch_size: 32,
            step_halving_epochs: 20,
            plateau: PlateauConfig::default(),
            early_stop_patience: 15,
            clip_norm: 1.0,
            max_epochs: 100,
            seed: 0,
            class_weight_mode: ClassWeightMode::InverseFrequency,
            min_lr: 1e-6,
            adam: AdamConfig::default(),
            target_val_f1: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return bad("lr0 must be positive and finite");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.step_halving_epochs == 0 || self.plateau.patience == 0 || self.early_stop_patience == 0
        {
            return bad("schedule and patience values must be at least 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("empty {0} set")]
    EmptyDataset(&'static str),
    #[error("training loss diverged (non-finite on two consecutive steps) at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("writing run artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing checkpoint: {0}")]
    Checkpoint(String),
}
