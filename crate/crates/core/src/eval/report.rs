use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{argmax, auc_ovr, confusion, prf, roc_points, ConfusionMatrix, MetricError};
use super::EvalError;
use crate::dataset::Dataset;
use crate::model::{predict, ModelParams};
use crate::tensor::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Fixed number of shards the dataset is split into; results do not
    /// depend on it or on the worker count.
    pub shards: usize,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            shards: 4,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub support: u64,
    pub zero_division: bool,
    /// Counted in the macro averages: the class occurs in the labels or in
    /// the predictions.
    pub in_macro: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub model_id: String,
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_auc: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub total: u64,
}

/// Per-sample eval-mode outputs in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub ids: Vec<String>,
    pub truth: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

impl Predictions {
    pub fn predicted(&self) -> Vec<usize> {
        self.probs.iter().map(|p| argmax(p)).collect()
    }

    pub fn accuracy(&self) -> f64 {
        if self.truth.is_empty() {
            return 0.0;
        }
        let hits = self
            .predicted()
            .iter()
            .zip(&self.truth)
            .filter(|(p, t)| p == t)
            .count();
        hits as f64 / self.truth.len() as f64
    }
}

/// Eval-mode forward over the dataset. Contiguous shards run on the rayon
/// pool and are concatenated in shard order.
pub fn predict_dataset<T: Scalar>(
    params: &ModelParams<T>,
    data: &Dataset,
    cfg: &EvalConfig,
) -> Result<Predictions, EvalError> {
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let n = data.len();
    let shards = cfg.shards.clamp(1, n);
    let per = n.div_ceil(shards);
    let batch = cfg.batch_size.max(1);
    let chunks: Vec<Vec<usize>> = (0..n).collect::<Vec<_>>().chunks(per).map(|c| c.to_vec()).collect();
    let parts: Vec<Result<Vec<Vec<f64>>, EvalError>> = chunks
        .par_iter()
        .map(|idx| {
            let mut rows = Vec::with_capacity(idx.len());
            for b in idx.chunks(batch) {
                let (x, _) = data.batch::<T>(b);
                let probs = predict(params, &x)?;
                let k = probs.shape()[1];
                rows.extend(
                    probs
                        .data()
                        .chunks(k)
                        .map(|r| r.iter().map(|v| v.as_f64()).collect::<Vec<f64>>()),
                );
            }
            Ok(rows)
        })
        .collect();
    let mut probs = Vec::with_capacity(n);
    for p in parts {
        probs.extend(p?);
    }
    Ok(Predictions {
        ids: data.ids(),
        truth: data.labels(),
        probs,
    })
}

/// Assemble the report from predictions. Macro averages run over classes
/// present in the labels or the predictions.
pub fn report_from_predictions(
    pred: &Predictions,
    class_names: &[String],
    dataset_id: &str,
    model_id: &str,
) -> Result<EvalReport, EvalError> {
    let k = class_names.len();
    if let Some((row, p)) = pred.probs.iter().enumerate().find(|(_, p)| p.len() != k) {
        return Err(MetricError::ScoreWidth {
            row,
            got: p.len(),
            classes: k,
        }
        .into());
    }
    let predicted = pred.predicted();
    let cm = confusion(&pred.truth, &predicted, k)?;
    let auc = auc_ovr(&pred.probs, &pred.truth, k);
    let classes: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let m = prf(&cm, c);
            ClassMetrics {
                name: class_names[c].clone(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                auc: auc.per_class[c],
                support: cm.support(c),
                zero_division: m.zero_division,
                in_macro: cm.support(c) > 0 || cm.predicted(c) > 0,
            }
        })
        .collect();
    let included: Vec<&ClassMetrics> = classes.iter().filter(|c| c.in_macro).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if included.is_empty() {
            0.0
        } else {
            included.iter().map(|c| f(c)).sum::<f64>() / included.len() as f64
        }
    };
    Ok(EvalReport {
        dataset_id: dataset_id.to_string(),
        model_id: model_id.to_string(),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        macro_auc: auc.macro_auc,
        total: cm.total(),
        confusion: cm,
        classes,
    })
}

pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    data: &Dataset,
    cfg: &EvalConfig,
    dataset_id: &str,
    model_id: &str,
) -> Result<(EvalReport, Predictions), EvalError> {
    let pred = predict_dataset(params, data, cfg)?;
    let names: Vec<String> = (0..params.config().num_classes)
        .map(|i| params.config().class_name(i))
        .collect();
    let report = report_from_predictions(&pred, &names, dataset_id, model_id)?;
    Ok((report, pred))
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per class followed by the macro row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,auc,support,zero_division\n");
        let auc = |a: Option<f64>| a.map(|v| format!("{v:.6}")).unwrap_or_default();
        for c in &self.classes {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{},{},{}\n",
                c.name,
                c.precision,
                c.recall,
                c.f1,
                auc(c.auc),
                c.support,
                c.zero_division
            ));
        }
        out.push_str(&format!(
            "macro,{:.6},{:.6},{:.6},{},{},false\n",
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            auc(self.macro_auc),
            self.total
        ));
        out
    }
}

/// ROC points for every class as CSV: `class,fpr,tpr,threshold`.
pub fn roc_csv(pred: &Predictions, class_names: &[String]) -> String {
    let mut out = String::from("class,fpr,tpr,threshold\n");
    for (c, name) in class_names.iter().enumerate() {
        let scores: Vec<f64> = pred.probs.iter().map(|p| p[c]).collect();
        let pos: Vec<bool> = pred.truth.iter().map(|&t| t == c).collect();
        if !pos.iter().any(|&p| p) || pos.iter().all(|&p| p) {
            continue;
        }
        for (fpr, tpr, thr) in roc_points(&scores, &pos) {
            out.push_str(&format!("{name},{fpr:.6},{tpr:.6},{thr}\n"));
        }
    }
    out
}
