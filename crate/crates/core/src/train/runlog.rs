use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
    pub train_accuracy: f64,
    pub lr: f64,
    pub wall_time_s: f64,
    /// Largest pre-clip gradient norm seen during the epoch.
    pub max_grad_norm: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub epochs: Vec<EpochRecord>,
    pub checkpoints: Vec<String>,
    pub best_epoch: Option<usize>,
    pub stop_reason: String,
}

impl RunLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|e| self.epochs.get(e))
    }

    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("record serializes") + "\n")
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "epoch,train_loss,val_loss,val_macro_f1,train_accuracy,lr,wall_time_s,max_grad_norm,improved\n",
        );
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.3},{},{}\n",
                e.epoch,
                e.train_loss,
                e.val_loss,
                e.val_macro_f1,
                e.train_accuracy,
                e.lr,
                e.wall_time_s,
                e.max_grad_norm,
                e.improved
            ));
        }
        out
    }

    /// Loss and metric columns only: equal across reruns with the same seed.
    pub fn deterministic_view(&self) -> Vec<(f64, f64, f64, f64)> {
        self.epochs
            .iter()
            .map(|e| (e.train_loss, e.val_loss, e.val_macro_f1, e.lr))
            .collect()
    }

    pub fn append_jsonl(path: &Path, record: &EpochRecord) -> std::io::Result<()> {
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        writeln!(f, "{}", serde_json::to_string(record).expect("record serializes"))
    }
}
