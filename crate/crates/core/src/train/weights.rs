use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeightMode {
    None,
    InverseFrequency,
}

/// Per-class loss weights from training labels.
///
/// Inverse frequency gives `n / (k * n_i)` to every present class, then
/// rescales so the present classes average 1. Absent classes get 0.
pub fn class_weights(labels: &[usize], k: usize, mode: ClassWeightMode) -> Vec<f64> {
    if mode == ClassWeightMode::None {
        return vec![1.0; k];
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l < k {
            counts[l] += 1;
        }
    }
    let n = labels.len() as f64;
    let mut w: Vec<f64> = counts
        .iter()
        .map(|&c| if c > 0 { n / (k as f64 * c as f64) } else { 0.0 })
        .collect();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present > 0 {
        let mean = w.iter().sum::<f64>() / present as f64;
        for v in &mut w {
            *v /= mean;
        }
    }
    w
}
