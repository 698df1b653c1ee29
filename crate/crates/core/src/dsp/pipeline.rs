use serde::{Deserialize, Serialize};

use super::{highpass, resample, DspError};

/// Which leads feed the model, after resampling and filtering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LeadRepr", into = "LeadRepr")]
pub enum LeadSelection {
    All,
    Indices(Vec<usize>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LeadRepr {
    Name(String),
    List(Vec<usize>),
}

impl TryFrom<LeadRepr> for LeadSelection {
    type Error = String;

    fn try_from(r: LeadRepr) -> Result<Self, String> {
        match r {
            LeadRepr::Name(s) if s == "all" => Ok(Self::All),
            LeadRepr::Name(s) => Err(format!("lead_selection must be \"all\" or a list, got {s:?}")),
            LeadRepr::List(v) => Ok(Self::Indices(v)),
        }
    }
}

impl From<LeadSelection> for LeadRepr {
    fn from(l: LeadSelection) -> Self {
        match l {
            LeadSelection::All => LeadRepr::Name("all".into()),
            LeadSelection::Indices(v) => LeadRepr::List(v),
        }
    }
}

impl LeadSelection {
    /// Lead I only.
    pub fn single() -> Self {
        Self::Indices(vec![0])
    }

    pub fn count(&self, available: usize) -> usize {
        match self {
            Self::All => available,
            Self::Indices(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    None,
    ZScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub target_fs: u32,
    pub target_len: usize,
    pub highpass_cutoff: f64,
    pub highpass_order: usize,
    pub lead_selection: LeadSelection,
    pub normalize: Normalize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_fs: 250,
            target_len: 15000,
            highpass_cutoff: 0.5,
            highpass_order: 2,
            lead_selection: LeadSelection::All,
            normalize: Normalize::ZScore,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.target_fs == 0 || self.target_len == 0 {
            return Err(DspError::InvalidConfig(
                "target_fs and target_len must be positive".into(),
            ));
        }
        let nyquist = self.target_fs as f64 / 2.0;
        if !(self.highpass_cutoff > 0.0 && self.highpass_cutoff < nyquist) {
            return Err(DspError::InvalidCutoff {
                cutoff: self.highpass_cutoff,
                nyquist,
            });
        }
        if self.highpass_order == 0 {
            return Err(DspError::InvalidConfig("highpass_order must be at least 1".into()));
        }
        if matches!(&self.lead_selection, LeadSelection::Indices(v) if v.is_empty()) {
            return Err(DspError::InvalidConfig("lead_selection is empty".into()));
        }
        Ok(())
    }
}

/// Truncate to the first `target_len` samples or zero-pad at the end.
pub fn fix_length<T: Copy + Default>(x: &[T], target_len: usize) -> Vec<T> {
    let mut y: Vec<T> = x.iter().take(target_len).copied().collect();
    y.resize(target_len, T::default());
    y
}

/// Z-score `x[..valid]` in place; samples past `valid` are left alone.
/// Near-constant leads (std below 1e-8) are only centred.
pub fn normalize_lead(x: &mut [f64], valid: usize) {
    let v = valid.min(x.len());
    if v == 0 {
        return;
    }
    // shifted by the first sample so a constant lead centres to exact zeros
    let x0 = x[0];
    let mean = x0 + x[..v].iter().map(|a| a - x0).sum::<f64>() / v as f64;
    let var = x[..v].iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v as f64;
    let std = var.sqrt();
    for a in &mut x[..v] {
        *a -= mean;
        if std >= 1e-8 {
            *a /= std;
        }
    }
}

/// Z-score every lead over its first `valid` samples.
pub fn normalize(leads: &mut [Vec<f64>], valid: usize) {
    for l in leads {
        normalize_lead(l, valid);
    }
}

/// Resample, high-pass, fix the length, select leads, normalize. Returns
/// `leads_selected` rows of exactly `target_len` samples; the zero padding
/// stays zero.
pub fn preprocess(
    leads: &[Vec<f32>],
    fs: u32,
    cfg: &PreprocessConfig,
) -> Result<Vec<Vec<f32>>, DspError> {
    cfg.validate()?;
    let x: Vec<Vec<f64>> = leads
        .iter()
        .map(|l| l.iter().map(|&v| v as f64).collect())
        .collect();
    let x = resample(&x, fs, cfg.target_fs)?;
    let resampled_len = x.first().map_or(0, |l| l.len());
    let fs = cfg.target_fs as f64;
    let mut x: Vec<Vec<f64>> = x
        .iter()
        .map(|l| {
            highpass(l, fs, cfg.highpass_cutoff, cfg.highpass_order)
                .map(|y| fix_length(&y, cfg.target_len))
        })
        .collect::<Result<_, _>>()?;
    if let LeadSelection::Indices(idx) = &cfg.lead_selection {
        let mut picked = Vec::with_capacity(idx.len());
        for &i in idx {
            let l = x.get(i).ok_or(DspError::LeadOutOfRange {
                lead: i,
                leads: leads.len(),
            })?;
            picked.push(l.clone());
        }
        x = picked;
    }
    if cfg.normalize == Normalize::ZScore {
        normalize(&mut x, resampled_len.min(cfg.target_len));
    }
    Ok(x
        .into_iter()
        .map(|l| l.into_iter().map(|v| v as f32).collect())
        .collect())
}
