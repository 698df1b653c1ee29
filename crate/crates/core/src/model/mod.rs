//! The CNN-attention-BiLSTM classifier: configuration, parameters and the
//! forward pass.

mod config;
mod forward;
mod params;

pub use config::{
    count_params, AttentionConfig, BiLstmConfig, ConvBlockConfig, HeadConfig, ModelConfig,
    Variant, DEFAULT_CLASSES,
};
pub use forward::{forward, predict, BoundParams, ForwardOutput};
pub use params::{bn_specs, canonical_names, param_specs, ModelParams, ParamSpec, BN_BUFFERS};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("unknown variant `{0}` (expected cnn, cnn_attention, cnn_bilstm or full)")]
    UnknownVariant(String),
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("parameter names do not match the config: missing {missing:?}, unexpected {extra:?}")]
    NameSetMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("{}", lead_mismatch_message(*expected, *got))]
    LeadMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn lead_mismatch_message(expected: usize, got: usize) -> String {
    let kind = |n: usize| match n {
        1 => "single-lead (Lead I)".to_string(),
        12 => "12-lead".to_string(),
        n => format!("{n}-lead"),
    };
    format!(
        "lead-count mismatch: model expects {} input, got {} input",
        kind(expected),
        kind(got)
    )
}
