//! Recording headers and payloads, label maps, manifests, splits and the
//! preprocessed cache.

mod cache;
mod header;
mod labels;
mod manifest;
mod signal;
mod splits;

pub use cache::{read_cache, write_cache, CACHE_MAGIC};
pub use header::{emit_header, parse_header, Header, LeadInfo};
pub use labels::LabelMap;
pub use manifest::{build_manifest, load_record, Manifest, ManifestRow, SkipReport};
pub use signal::{load_signal, write_signal, Encoding};
pub use splits::{make_splits, Assignment, SplitMode, SplitPlan};

use std::path::Path;

use thiserror::Error;

/// One recording: `signal` holds `leads x samples` values in millivolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub id: String,
    pub signal: Vec<Vec<f32>>,
    pub fs: u32,
    pub labels: Vec<usize>,
    pub source_fs: u32,
}

impl EcgRecord {
    pub fn leads(&self) -> usize {
        self.signal.len()
    }

    pub fn samples(&self) -> usize {
        self.signal.first().map_or(0, |l| l.len())
    }

    pub fn primary_label(&self) -> usize {
        self.labels[0]
    }

    /// Check the record invariants against `k` classes.
    pub fn validate(&self, k: usize) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::InvalidRecord(self.id.clone(), m));
        if self.signal.is_empty() || self.samples() == 0 {
            return bad("no samples".into());
        }
        if self.signal.iter().any(|l| l.len() != self.samples()) {
            return bad("leads differ in length".into());
        }
        if self.signal.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite sample".into());
        }
        if self.fs == 0 {
            return bad("zero sampling rate".into());
        }
        if self.labels.is_empty() {
            return bad("no labels".into());
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= k) {
            return bad(format!("label {l} out of range for {k} classes"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("header has no #Dx line")]
    MissingDx,
    #[error("payload {path} has {got} bytes, expected {expected}")]
    SizeMismatch {
        path: String,
        expected: u64,
        got: u64,
    },
    #[error("unknown signal encoding {0:?}")]
    UnknownEncoding(String),
    #[error("no mappable records under {0}")]
    EmptyDataset(String),
    #[error("bad cache file {path}: {reason}")]
    BadCache { path: String, reason: String },
    #[error("label map: {0}")]
    LabelMap(String),
    #[error("{path}: {reason}")]
    Csv { path: String, reason: String },
    #[error("record {0}: {1}")]
    InvalidRecord(String, String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}
