//! Host-side inference latency and memory measurement.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{predict, ModelError, ModelParams};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: usize,
    pub total_s: f64,
    pub mean_s: f64,
    pub median_s: f64,
    pub p95_s: f64,
    pub rss_before_bytes: Option<u64>,
    pub rss_after_bytes: Option<u64>,
    pub model_file_bytes: u64,
    pub host: String,
}

/// Resident set size of this process, from `/proc/self/status`.
pub fn resident_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

pub fn host_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{} {} / {cpu} / {threads} threads / rayon pool {}",
        std::env::consts::OS,
        std::env::consts::ARCH,
        rayon::current_num_threads()
    )
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Time `runs` single-sample eval-mode forwards of `x: [1, leads, t]`
/// after one untimed warm-up.
pub fn bench(
    params: &ModelParams<f32>,
    x: &Tensor<f32>,
    runs: usize,
    model_file_bytes: u64,
) -> Result<BenchReport, ModelError> {
    let runs = runs.max(1);
    let rss_before = resident_bytes();
    predict(params, x)?;
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        std::hint::black_box(predict(params, x)?);
        times.push(t.elapsed().as_secs_f64());
    }
    let rss_after = resident_bytes();
    let total: f64 = times.iter().sum();
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BenchReport {
        runs,
        total_s: total,
        mean_s: total / runs as f64,
        median_s: if runs % 2 == 1 {
            sorted[runs / 2]
        } else {
            (sorted[runs / 2 - 1] + sorted[runs / 2]) / 2.0
        },
        p95_s: percentile(&sorted, 0.95),
        rss_before_bytes: rss_before,
        rss_after_bytes: rss_after,
        model_file_bytes,
        host: host_description(),
    })
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mb = |b: Option<u64>| b.map_or("n/a".to_string(), |v| format!("{:.1} MB", v as f64 / 1e6));
        format!(
            "runs: {}\ntotal: {:.4} s\nmean: {:.6} s/sample\nmedian: {:.6} s\np95: {:.6} s\n\
             rss before: {}\nrss after: {}\nmodel file: {} bytes\nhost: {}\n",
            self.runs,
            self.total_s,
            self.mean_s,
            self.median_s,
            self.p95_s,
            mb(self.rss_before_bytes),
            mb(self.rss_after_bytes),
            self.model_file_bytes,
            self.host
        )
    }
}
