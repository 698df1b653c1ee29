use std::collections::BTreeMap;
use std::path::Path;

use super::{io_err, IoError};

const DEFAULT_CSV: &str = include_str!("../../data/labels.csv");

/// Diagnostic code to class index. Several codes may share one class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub entries: BTreeMap<String, (usize, String)>,
    pub class_names: Vec<String>,
}

impl Default for LabelMap {
    /// The nine shipped classes: AF, IAVB, LBBB, PAC, PVC, RBBB, SNR, STD, STE.
    fn default() -> Self {
        Self::from_csv(DEFAULT_CSV).expect("shipped label map parses")
    }
}

impl LabelMap {
    /// Parse `index,abbr,code` rows.
    pub fn from_csv(text: &str) -> Result<Self, IoError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        let mut names: BTreeMap<usize, String> = BTreeMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| IoError::LabelMap(e.to_string()))?;
            if row.len() != 3 {
                return Err(IoError::LabelMap(format!("expected 3 columns, got {}", row.len())));
            }
            let idx: usize = row[0]
                .parse()
                .map_err(|_| IoError::LabelMap(format!("bad index {:?}", &row[0])))?;
            let abbr = row[1].to_string();
            if let Some(prev) = names.insert(idx, abbr.clone()) {
                if prev != abbr {
                    return Err(IoError::LabelMap(format!("index {idx} named {prev} and {abbr}")));
                }
            }
            if entries.insert(row[2].to_string(), (idx, abbr)).is_some() {
                return Err(IoError::LabelMap(format!("code {} listed twice", &row[2])));
            }
        }
        let class_names: Vec<String> = names.values().cloned().collect();
        if names.keys().copied().ne(0..names.len()) {
            return Err(IoError::LabelMap("class indices must be contiguous from 0".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if !class_names.iter().all(|n| seen.insert(n)) {
            return Err(IoError::LabelMap("class abbreviations must be unique".into()));
        }
        if class_names.is_empty() {
            return Err(IoError::LabelMap("no classes".into()));
        }
        Ok(Self {
            entries,
            class_names,
        })
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_csv(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_of(&self, code: &str) -> Option<usize> {
        self.entries.get(code).map(|e| e.0)
    }

    /// Mapped classes of `codes` in order, without repeats.
    pub fn map_codes(&self, codes: &[String]) -> Vec<usize> {
        let mut out = Vec::new();
        for c in codes {
            if let Some(i) = self.class_of(c) {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out
    }

    /// First code listed for each class, for writing synthetic headers.
    pub fn code_for(&self, class: usize) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, (i, _))| *i == class)
            .map(|(c, _)| c.as_str())
    }
}
