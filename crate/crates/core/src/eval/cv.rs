use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalConfig, EvalReport};
use crate::dataset::Dataset;
use crate::model::{ModelConfig, ModelParams};
use crate::tensor::{Rng, Stream};
use crate::train::{fit, TrainConfig, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<EvalReport>,
    pub fold_macro_f1: Vec<f64>,
    pub mean_macro_f1: f64,
    /// Population standard deviation over folds.
    pub std_macro_f1: f64,
    /// Record ids evaluated in each fold.
    pub fold_ids: Vec<Vec<String>>,
}

/// Split `indices` into (rest, held) with `fraction` of every class held out
/// (rounded, at least one when a class has two or more members).
pub fn stratified_holdout(
    indices: &[usize],
    labels: &[usize],
    fraction: f64,
    rng: &mut Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        by_class.entry(labels[i]).or_default().push(i);
    }
    let (mut rest, mut held) = (Vec::new(), Vec::new());
    for (_, mut members) in by_class {
        rng.shuffle(&mut members);
        let mut n = (members.len() as f64 * fraction).round() as usize;
        if n == 0 && members.len() >= 2 {
            n = 1;
        }
        held.extend_from_slice(&members[..n]);
        rest.extend_from_slice(&members[n..]);
    }
    rest.sort_unstable();
    held.sort_unstable();
    (rest, held)
}

/// k-fold cross-validation. `folds[i]` is the fold of sample `i`. For each
/// fold the remaining folds are split into training data and a stratified
/// 10% validation slice for early stopping; the fold itself is the test
/// set. Every fold starts from the same seeded initialization.
pub fn cross_validate(
    data: &Dataset,
    folds: &[usize],
    model: &ModelConfig,
    train_cfg: &TrainConfig,
    eval_cfg: &EvalConfig,
    run_dir: Option<&Path>,
) -> Result<CvReport, TrainError> {
    assert_eq!(folds.len(), data.len(), "one fold index per sample");
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    let labels = data.labels();
    let mut reports = Vec::new();
    let mut fold_ids = Vec::new();
    for f in 0..k {
        let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
        if test_idx.is_empty() {
            continue;
        }
        let pool: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
        let mut rng = Rng::substream(train_cfg.seed, Stream::Split, 1000 + f as u64);
        let (tr, va) = stratified_holdout(&pool, &labels, 0.1, &mut rng);
        let pick = |ix: &[usize]| Dataset::new(ix.iter().map(|&i| data.samples[i].clone()).collect());
        let (train, val, test) = (pick(&tr), pick(&va), pick(&test_idx));
        let val = if val.is_empty() { train.clone() } else { val };

        let mut init = Rng::new(train_cfg.seed, Stream::Init);
        let params = ModelParams::<f32>::build(model, &mut init)?;
        let dir = match run_dir {
            Some(d) => {
                let p = d.join(format!("fold_{f:02}"));
                std::fs::create_dir_all(&p)?;
                Some(p)
            }
            None => None,
        };
        let out = fit(params, &train, &val, train_cfg, dir.as_deref())?;
        let (report, _) = evaluate(&out.best, &test, eval_cfg, &format!("fold_{f}"), "best")?;
        fold_ids.push(test.ids());
        reports.push(report);
    }
    let f1: Vec<f64> = reports.iter().map(|r| r.macro_f1).collect();
    let n = f1.len().max(1) as f64;
    let mean = f1.iter().sum::<f64>() / n;
    let std = (f1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(CvReport {
        folds: reports,
        fold_macro_f1: f1,
        mean_macro_f1: mean,
        std_macro_f1: std,
        fold_ids,
    })
}
