//! CNN-attention-BiLSTM arrhythmia classification for standard 12-lead and
//! single-lead ECG, with every numerical piece built in: signal
//! preprocessing, a reverse-mode differentiation engine, the network,
//! training, and evaluation metrics.

pub mod archive;
pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod dsp;
pub mod eval;
pub mod io;
pub mod model;
pub mod tensor;
pub mod train;
