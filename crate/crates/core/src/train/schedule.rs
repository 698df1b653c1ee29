use serde::{Deserialize, Serialize};

use super::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlateauConfig {
    pub enabled: bool,
    pub factor: f64,
    pub patience: usize,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            factor: 0.5,
            patience: 8,
        }
    }
}

/// Reduce-on-plateau tracker for a maximized monitor (validation macro-F1).
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauState {
    pub best: f64,
    pub wait: usize,
    pub multiplier: f64,
}

impl Default for PlateauState {
    fn default() -> Self {
        Self {
            best: f64::NEG_INFINITY,
            wait: 0,
            multiplier: 1.0,
        }
    }
}

impl PlateauState {
    /// Record one epoch's monitor value. After `patience` epochs without a
    /// strict improvement the multiplier shrinks once and the window restarts.
    /// Returns true when a reduction happened.
    pub fn observe(&mut self, value: f64, cfg: &PlateauConfig) -> bool {
        if !cfg.enabled {
            return false;
        }
        if value > self.best {
            self.best = value;
            self.wait = 0;
            return false;
        }
        self.wait += 1;
        if self.wait >= cfg.patience {
            self.multiplier *= cfg.factor;
            self.wait = 0;
            return true;
        }
        false
    }
}

/// `lr0 * 0.5^floor(epoch / step_halving_epochs)` times the plateau
/// multiplier, floored at `min_lr`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig, plateau: &PlateauState) -> f64 {
    let halvings = (epoch / cfg.step_halving_epochs.max(1)) as i32;
    let lr = cfg.lr0 * 0.5f64.powi(halvings) * plateau.multiplier;
    lr.max(cfg.min_lr)
}
