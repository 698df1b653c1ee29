use std::collections::BTreeMap;
use std::path::Path;

use log::warn;

use super::{io_err, IoError, Manifest};
use crate::tensor::{Rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// 80/10/10 train/val/test by class.
    Holdout,
    KFold(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Assignment {
    Train,
    Val,
    Test,
    Fold(usize),
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Train => f.write_str("train"),
            Self::Val => f.write_str("val"),
            Self::Test => f.write_str("test"),
            Self::Fold(i) => write!(f, "fold{i}"),
        }
    }
}

impl std::str::FromStr for Assignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            _ => s
                .strip_prefix("fold")
                .and_then(|n| n.parse().ok())
                .map(Self::Fold)
                .ok_or_else(|| format!("unknown assignment {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub seed: u64,
    pub mode: SplitMode,
    pub assignment: BTreeMap<String, Assignment>,
    /// Classes with fewer records than folds.
    pub warnings: Vec<String>,
}

impl SplitPlan {
    /// Ids with the given assignment, sorted.
    pub fn ids(&self, which: Assignment) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &a)| a == which)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,assignment\n");
        for (id, a) in &self.assignment {
            out.push_str(&format!("{id},{a}\n"));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv()).map_err(io_err(path))
    }

    /// Read a plan written by [`SplitPlan::save`]. The mode is inferred
    /// from the assignments.
    pub fn load(path: &Path, seed: u64) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let bad = |reason: String| IoError::Csv {
            path: path.display().to_string(),
            reason,
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut assignment = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 columns, got {}", rec.len())));
            }
            assignment.insert(rec[0].to_string(), rec[1].parse().map_err(bad)?);
        }
        let folds = assignment
            .values()
            .filter_map(|a| match a {
                Assignment::Fold(i) => Some(i + 1),
                _ => None,
            })
            .max();
        Ok(Self {
            seed,
            mode: folds.map_or(SplitMode::Holdout, SplitMode::KFold),
            assignment,
            warnings: Vec::new(),
        })
    }
}

/// Stratified split on each record's primary label, deterministic for a
/// given manifest and seed.
///
/// Holdout sends `round(n/10)` of every class to test and as many to
/// validation. K-fold deals each class's shuffled records round-robin,
/// continuing the rotation across classes so fold sizes stay balanced.
pub fn make_splits(manifest: &Manifest, seed: u64, mode: SplitMode) -> Result<SplitPlan, IoError> {
    if manifest.is_empty() {
        return Err(IoError::EmptyDataset("manifest".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for r in &manifest.rows {
        by_class.entry(r.primary()).or_default().push(r.id.clone());
    }
    let mut rng = Rng::new(seed, Stream::Split);
    let mut assignment = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut next_fold = 0;
    for (class, mut ids) in by_class {
        ids.sort();
        rng.shuffle(&mut ids);
        match mode {
            SplitMode::Holdout => {
                let n_test = (ids.len() as f64 * 0.1).round() as usize;
                let n_val = (ids.len() as f64 * 0.1).round() as usize;
                for (i, id) in ids.into_iter().enumerate() {
                    let a = if i < n_test {
                        Assignment::Test
                    } else if i < n_test + n_val {
                        Assignment::Val
                    } else {
                        Assignment::Train
                    };
                    assignment.insert(id, a);
                }
            }
            SplitMode::KFold(k) => {
                let k = k.max(1);
                if ids.len() < k {
                    let name = manifest
                        .class_names
                        .get(class)
                        .cloned()
                        .unwrap_or_else(|| class.to_string());
                    let msg = format!("class {name} has {} records for {k} folds", ids.len());
                    warn!("{msg}");
                    warnings.push(msg);
                }
                for id in ids {
                    assignment.insert(id, Assignment::Fold(next_fold));
                    next_fold = (next_fold + 1) % k;
                }
            }
        }
    }
    Ok(SplitPlan {
        seed,
        mode,
        assignment,
        warnings,
    })
}
