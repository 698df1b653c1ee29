use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, load_signal, parse_header, EcgRecord, Encoding, Header, IoError, LabelMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    /// Header file path.
    pub path: String,
    /// Mapped classes; the first is the training label.
    pub labels: Vec<usize>,
    pub duration_s: f64,
    pub leads: usize,
}

impl ManifestRow {
    pub fn primary(&self) -> usize {
        self.labels[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    /// Records per primary label.
    pub class_counts: Vec<usize>,
    pub class_names: Vec<String>,
}

/// Records left out of a manifest, with the reason.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkipReport {
    pub skipped: Vec<(String, String)>,
}

impl SkipReport {
    pub fn is_empty(&self) -> bool {
        self.skipped.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,reason\n");
        for (p, r) in &self.skipped {
            out.push_str(&format!("{p},{}\n", r.replace(',', ";")));
        }
        out
    }
}

impl Manifest {
    pub fn from_rows(rows: Vec<ManifestRow>, class_names: Vec<String>) -> Self {
        let mut class_counts = vec![0; class_names.len()];
        for r in &rows {
            class_counts[r.primary()] += 1;
        }
        Self {
            rows,
            class_counts,
            class_names,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn primary_labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.primary()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "path", "labels", "duration_s", "leads"])
            .expect("in-memory write");
        for r in &self.rows {
            let labels: Vec<String> = r.labels.iter().map(|l| l.to_string()).collect();
            w.write_record([
                r.id.clone(),
                r.path.clone(),
                labels.join(";"),
                r.duration_s.to_string(),
                r.leads.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str, class_names: Vec<String>, origin: &str) -> Result<Self, IoError> {
        let bad = |reason: String| IoError::Csv {
            path: origin.to_string(),
            reason,
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 5 {
                return Err(bad(format!("expected 5 columns, got {}", rec.len())));
            }
            let labels = rec[2]
                .split(';')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad(format!("bad labels {:?}", &rec[2])))?;
            if labels.is_empty() || labels.iter().any(|&l| l >= class_names.len()) {
                return Err(bad(format!("labels {:?} out of range", &rec[2])));
            }
            rows.push(ManifestRow {
                id: rec[0].to_string(),
                path: rec[1].to_string(),
                labels,
                duration_s: rec[3].parse().map_err(|_| bad("bad duration".into()))?,
                leads: rec[4].parse().map_err(|_| bad("bad lead count".into()))?,
            });
        }
        Ok(Self::from_rows(rows, class_names))
    }

    pub fn load(path: &Path, class_names: Vec<String>) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_csv(&text, class_names, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv()).map_err(io_err(path))
    }
}

fn payload_path(header_path: &Path, h: &Header) -> PathBuf {
    let dir = header_path.parent().unwrap_or(Path::new("."));
    dir.join(&h.leads[0].file)
}

fn scan_one(path: &Path, map: &LabelMap) -> Result<ManifestRow, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let h = parse_header(&text).map_err(|e| e.to_string())?;
    let labels = map.map_codes(&h.codes);
    if labels.is_empty() {
        return Err(format!("no mappable code in {:?}", h.codes));
    }
    let payload = payload_path(path, &h);
    if !payload.exists() {
        return Err(format!("payload {} missing", payload.display()));
    }
    Ok(ManifestRow {
        id: h.id.clone(),
        path: path.display().to_string(),
        labels,
        duration_s: h.n_samples as f64 / h.fs as f64,
        leads: h.n_leads,
    })
}

/// Scan `dir` for `.hea` headers in parallel. Rows are sorted by id;
/// unreadable or unmappable records go to the skip report.
pub fn build_manifest(dir: &Path, map: &LabelMap) -> Result<(Manifest, SkipReport), IoError> {
    let mut headers: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "hea"))
        .collect();
    headers.sort();
    let results: Vec<(PathBuf, Result<ManifestRow, String>)> = headers
        .par_iter()
        .map(|p| (p.clone(), scan_one(p, map)))
        .collect();
    let mut rows = Vec::new();
    let mut skips = SkipReport::default();
    for (p, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(reason) => skips.skipped.push((p.display().to_string(), reason)),
        }
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    if rows.is_empty() {
        return Err(IoError::EmptyDataset(dir.display().to_string()));
    }
    Ok((Manifest::from_rows(rows, map.class_names.clone()), skips))
}

/// Load the header and payload named by a header path.
pub fn load_record(header_path: &Path, map: &LabelMap) -> Result<EcgRecord, IoError> {
    let text = std::fs::read_to_string(header_path).map_err(io_err(header_path))?;
    let h = parse_header(&text)?;
    let payload = payload_path(header_path, &h);
    let encoding = Encoding::from_path(&payload)?;
    let gains: Vec<f64> = h.leads.iter().map(|l| l.gain).collect();
    let signal = load_signal(&payload, h.n_leads, h.n_samples, encoding, &gains)?;
    Ok(EcgRecord {
        id: h.id,
        signal,
        fs: h.fs,
        labels: map.map_codes(&h.codes),
        source_fs: h.fs,
    })
}
