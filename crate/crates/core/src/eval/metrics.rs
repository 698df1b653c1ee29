use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("score row {row} has {got} entries for {classes} classes")]
    ScoreWidth { row: usize, got: usize, classes: usize },
}

/// `counts[t][p]`: rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("true\\pred");
        for n in class_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&class_names[i]);
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(truth: &[usize], pred: &[usize], k: usize) -> Result<ConfusionMatrix, MetricError> {
    if truth.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&t, &p) in truth.iter().zip(pred) {
        let bad = if t >= k { Some(t) } else if p >= k { Some(p) } else { None };
        if let Some(label) = bad {
            return Err(MetricError::LabelOutOfRange { label, classes: k });
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// A denominator was zero and the affected metric was set to 0.
    pub zero_division: bool,
}

/// Precision, recall and F1 of one class. Zero denominators yield 0 and set
/// the `zero_division` flag.
pub fn prf(cm: &ConfusionMatrix, class: usize) -> Prf {
    let tp = cm.true_positives(class);
    let fp = cm.predicted(class) - tp;
    let fn_ = cm.support(class) - tp;
    let mut zero_division = false;
    let mut ratio = |num: u64, den: u64| {
        if den == 0 {
            zero_division = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f1,
        zero_division,
    }
}

/// Rank-based one-vs-rest AUC for one class. `None` when the class has no
/// positives or no negatives.
///
/// Equals the Mann-Whitney U statistic over `n_pos * n_neg` with midranks
/// for ties. Ranks are doubled so the sum stays an exact integer.
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count() as u128;
    let n_neg = positive.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share the midrank (i + 1 + j) / 2
        let twice_mid = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&o| positive[o]).count() as u128;
        twice_rank_sum += twice_mid * pos_in_group;
        i = j;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Some(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucOvr {
    pub per_class: Vec<Option<f64>>,
    /// Unweighted mean over classes with a defined AUC.
    pub macro_auc: Option<f64>,
}

/// One-vs-rest AUC per class from `n x k` scores.
pub fn auc_ovr(scores: &[Vec<f64>], truth: &[usize], k: usize) -> AucOvr {
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| {
            let col: Vec<f64> = scores.iter().map(|row| row[c]).collect();
            let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            auc_binary(&col, &pos)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let macro_auc = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    AucOvr {
        per_class,
        macro_auc,
    }
}

/// ROC operating points `(fpr, tpr, threshold)` from the strictest
/// threshold down, starting at `(0, 0)`.
pub fn roc_points(scores: &[f64], positive: &[bool]) -> Vec<(f64, f64, f64)> {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0, f64::INFINITY)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        while i < order.len() && scores[order[i]] == thr {
            if positive[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let fpr = if n_neg > 0.0 { fp / n_neg } else { 0.0 };
        let tpr = if n_pos > 0.0 { tp / n_pos } else { 0.0 };
        points.push((fpr, tpr, thr));
    }
    points
}
