//! In-memory, model-ready samples.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::dsp::{preprocess, DspError, LeadSelection, PreprocessConfig};
use crate::io::{read_cache, EcgRecord, IoError, Manifest};
use crate::tensor::{Scalar, Tensor};

/// One preprocessed recording: `x` is `[leads, samples]`, `label` the
/// primary class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub x: Tensor<f32>,
    pub label: usize,
}

impl Sample {
    /// Wrap `leads x samples` rows; the label is the first listed class.
    pub fn from_rows(id: &str, rows: &[Vec<f32>], label: usize) -> Self {
        let c = rows.len();
        let t = rows.first().map_or(0, |r| r.len());
        let data: Vec<f32> = rows.iter().flatten().copied().collect();
        Self {
            id: id.to_string(),
            x: Tensor::new(data, &[c, t]).expect("rows share one length"),
            label,
        }
    }

    pub fn from_record(r: &EcgRecord) -> Self {
        Self::from_rows(&r.id, &r.signal, r.primary_label())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    /// Records used as they are, without preprocessing.
    pub fn from_records(records: &[EcgRecord]) -> Self {
        Self::new(records.iter().map(Sample::from_record).collect())
    }

    /// Run the preprocessing pipeline on every record in parallel.
    pub fn preprocessed(records: &[EcgRecord], cfg: &PreprocessConfig) -> Result<Self, DspError> {
        let samples = records
            .par_iter()
            .map(|r| {
                preprocess(&r.signal, r.fs, cfg).map(|rows| Sample::from_rows(&r.id, &rows, r.primary_label()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(samples))
    }

    /// Load `<cache_dir>/<id>.ecgs` for every manifest row, in row order.
    pub fn from_cache(manifest: &Manifest, cache_dir: &Path) -> Result<Self, IoError> {
        let samples = manifest
            .rows
            .par_iter()
            .map(|row| {
                let (rows, _) = read_cache(&cache_dir.join(format!("{}.ecgs", row.id)))?;
                Ok(Sample::from_rows(&row.id, &rows, row.primary()))
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(Self::new(samples))
    }

    /// Keep only the selected leads of every sample.
    pub fn select_leads(&self, sel: &LeadSelection) -> Result<Dataset, DspError> {
        let LeadSelection::Indices(idx) = sel else {
            return Ok(self.clone());
        };
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let (c, t) = (s.x.shape()[0], s.x.shape()[1]);
                let mut rows = Vec::with_capacity(idx.len());
                for &i in idx {
                    if i >= c {
                        return Err(DspError::LeadOutOfRange { lead: i, leads: c });
                    }
                    rows.push(s.x.data()[i * t..(i + 1) * t].to_vec());
                }
                Ok(Sample::from_rows(&s.id, &rows, s.label))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset::new(samples))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    /// `(leads, samples)` of the first sample.
    pub fn input_shape(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.x.shape()[0], s.x.shape()[1]))
    }

    /// Stack the samples at `indices` into a `[n, leads, samples]` batch.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> (Tensor<T>, Vec<usize>) {
        let rows: Vec<&Tensor<f32>> = indices.iter().map(|&i| &self.samples[i].x).collect();
        let stacked = Tensor::stack(&rows).expect("samples share one shape");
        let labels = indices.iter().map(|&i| self.samples[i].label).collect();
        (stacked.cast(), labels)
    }

    /// Samples whose id is in `ids`, in the order given.
    pub fn select(&self, ids: &[String]) -> Dataset {
        let index: HashMap<&str, usize> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        Dataset {
            samples: ids
                .iter()
                .filter_map(|id| index.get(id.as_str()).map(|&i| self.samples[i].clone()))
                .collect(),
        }
    }
}
