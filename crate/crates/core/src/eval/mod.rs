//! Precision, recall, F1, one-vs-rest AUC, confusion matrices, and
//! hold-out and k-fold evaluation.

mod cv;
mod metrics;
mod report;

pub use cv::{cross_validate, stratified_holdout, CvReport};
pub use metrics::{
    argmax, auc_binary, auc_ovr, confusion, prf, roc_points, AucOvr, ConfusionMatrix,
    MetricError, Prf,
};
pub use report::{
    evaluate, predict_dataset, report_from_predictions, roc_csv, ClassMetrics, EvalConfig,
    EvalReport, Predictions,
};

use thiserror::Error;

use crate::model::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
