#![allow(dead_code)]

pub mod ops;

use ecg_tinynet::dataset::Dataset;
use ecg_tinynet::dsp::{synth_corpus, LeadSelection, PreprocessConfig, SynthOptions};
use ecg_tinynet::model::{forward, BoundParams, ModelConfig, ModelParams};
use ecg_tinynet::train::{PlateauConfig, TrainConfig};
use ecg_tinynet::tensor::{Mode, Rng, Stream, Tape, Tensor, Var};

/// Random tensor with entries uniform in `[lo, hi)`.
pub fn rand_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.uniform_range(lo, hi)).collect(), shape).unwrap()
}

/// Random tensor whose entries keep at least `gap` away from zero, so that
/// finite differences never straddle a ReLU kink.
pub fn rand_away_from_zero(shape: &[usize], gap: f64, rng: &mut Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.uniform_range(gap, 1.0);
            if rng.uniform() < 0.5 { -m } else { m }
        })
        .collect();
    Tensor::new(data, shape).unwrap()
}

pub struct GradReport {
    pub max_rel: f64,
    pub checked: usize,
}

/// Central finite-difference check of `build` at `inputs`.
///
/// `build` maps the input leaves to any tensor; it is reduced to a scalar
/// through a fixed random projection so every output element matters. The
/// numeric side only ever evaluates forward values.
///
/// Relative error per element is `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check<F>(inputs: &[Tensor<f64>], floor: f64, seed: u64, build: F) -> GradReport
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let eval = |vals: &[Tensor<f64>], with_grad: bool| -> (f64, Vec<Option<Vec<f64>>>) {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = vals.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &leaves);
        let shape = tape.shape(out).to_vec();
        let mut prng = Rng::new(seed, Stream::Synth);
        let proj = rand_tensor(&shape, -1.0, 1.0, &mut prng);
        let pv = tape.constant(proj);
        let prod = tape.mul(out, pv).expect("projection");
        let loss = tape.sum(prod);
        let value = tape.value(loss).data()[0];
        if !with_grad {
            return (value, vec![]);
        }
        let grads = tape.backward(loss).unwrap();
        (
            value,
            leaves.iter().map(|&l| grads.slice(l).map(|g| g.to_vec())).collect(),
        )
    };
    let (_, analytic) = eval(inputs, true);
    let h = 1e-5;
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    for (i, t) in inputs.iter().enumerate() {
        for j in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            let numeric = (eval(&plus, false).0 - eval(&minus, false).0) / (2.0 * h);
            let a = analytic[i].as_ref().map(|g| g[j]).unwrap_or(0.0);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }
    GradReport { max_rel, checked }
}

/// Full-loss gradient check of the tiny model (C=1, T=32, K=3) in train
/// mode with a fixed dropout mask, against every parameter and the input.
pub fn tiny_model_gradient() -> GradReport {
    let cfg = ModelConfig::tiny(1, 3);
    let params = ModelParams::<f64>::build(&cfg, &mut Rng::new(5, Stream::Init)).unwrap();
    let names: Vec<String> = params.tensors().iter().map(|(n, _)| n.clone()).collect();
    let mut inputs: Vec<Tensor<f64>> = params.tensors().iter().map(|(_, t)| t.clone()).collect();
    let mut rng = Rng::new(6, Stream::Synth);
    inputs.push(rand_tensor(&[4, 1, 32], -2.0, 2.0, &mut rng));
    let targets = [0usize, 2, 1, 2];
    let weights = [0.7, 1.1, 1.2];
    grad_check(&inputs, 1e-3, 7, |tape, v| {
        let n = names.len();
        let bound = BoundParams::from_vars(names.iter().cloned().zip(v[..n].iter().copied()).collect());
        let mut drop = Rng::new(8, Stream::Dropout);
        let out = forward(&params, &bound, tape, v[n], Mode::Train, &mut drop).unwrap();
        tape.softmax_cross_entropy(out.logits, &targets, &weights).unwrap()
    })
}

/// Preprocessed synthetic records: `per_class` of each morphology, `t`
/// samples at 250 Hz, labels are positions in `morphologies`.
pub fn synth_dataset(morphologies: &[usize], per_class: usize, t: usize, leads: usize, seed: u64) -> Dataset {
    let opts = SynthOptions {
        leads,
        ..SynthOptions::default()
    };
    let recs = synth_corpus(morphologies, per_class, 250, t as f64 / 250.0, seed, &opts);
    let cfg = PreprocessConfig {
        target_len: t,
        lead_selection: LeadSelection::All,
        ..PreprocessConfig::default()
    };
    Dataset::preprocessed(&recs, &cfg).unwrap()
}

/// Flat learning rate for capacity experiments: no halving, no plateau
/// cuts, stop once the monitored set is fitted.
pub fn flat_lr_config(seed: u64, max_epochs: usize) -> TrainConfig {
    TrainConfig {
        lr0: 3e-3,
        batch_size: 8,
        step_halving_epochs: 1000,
        plateau: PlateauConfig {
            enabled: false,
            ..PlateauConfig::default()
        },
        early_stop_patience: max_epochs,
        max_epochs,
        seed,
        target_val_f1: Some(1.0),
        ..TrainConfig::default()
    }
}

pub fn tiny_params(leads: usize, k: usize, seed: u64) -> ModelParams<f32> {
    ModelParams::build(&ModelConfig::tiny(leads, k), &mut Rng::new(seed, Stream::Init)).unwrap()
}

/// Precision, recall and F1 of `class` by scanning every label pair.
pub fn brute_prf(truth: &[usize], pred: &[usize], class: usize) -> (f64, f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (p, r) = (div(tp, tp + fp), div(tp, tp + fn_));
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

/// Area under the explicit ROC curve: one operating point per distinct
/// score, counted directly, integrated with the trapezoid rule.
pub fn trapezoid_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for &thr in &thresholds {
        let tp = scores.iter().zip(positive).filter(|(&s, &p)| p && s >= thr).count() as f64;
        let fp = scores.iter().zip(positive).filter(|(&s, &p)| !p && s >= thr).count() as f64;
        pts.push((fp / n_neg, tp / n_pos));
    }
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}
