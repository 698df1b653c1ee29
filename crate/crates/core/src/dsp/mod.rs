//! Signal conditioning: FIR decimation, zero-phase Butterworth high-pass,
//! length fixing, lead selection and per-lead z-scoring, plus a synthetic
//! ECG generator for tests and demos.

mod filter;
mod pipeline;
mod resample;
mod synth;

pub use filter::{butter_highpass, filtfilt, highpass, sosfilt, Sos};
pub use pipeline::{
    fix_length, normalize, normalize_lead, preprocess, LeadSelection, Normalize, PreprocessConfig,
};
pub use resample::{kaiser_lowpass, resample, resample_lead};
pub use synth::{synth_corpus, synth_ecg, synth_ecg_with, SynthOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("source rate {from} Hz is not an integer multiple of target rate {to} Hz")]
    NonIntegerRatio { from: u32, to: u32 },
    #[error("cutoff {cutoff} Hz must lie strictly between 0 and {nyquist} Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error("lead {lead} requested but the record has {leads} leads")]
    LeadOutOfRange { lead: usize, leads: usize },
}
