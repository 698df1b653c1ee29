mod common;

use common::{brute_prf, synth_dataset, tiny_params, trapezoid_auc};
use ecg_tinynet::dataset::Dataset;
use ecg_tinynet::eval::{
    auc_binary, auc_ovr, confusion, evaluate, prf, report_from_predictions, EvalConfig, EvalError,
    Predictions,
};
use ecg_tinynet::tensor::{softmax_rows, Rng, Stream};
use ecg_tinynet::train::{fit, TrainConfig};
use proptest::prelude::*;

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("C{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn confusion_and_prf_match_pair_counts(k in 1usize..8, pairs in prop::collection::vec((0usize..8, 0usize..8), 0..1000)) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0 % k).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1 % k).collect();
        let cm = confusion(&truth, &pred, k).unwrap();
        for t in 0..k {
            for p in 0..k {
                let n = truth.iter().zip(&pred).filter(|(&a, &b)| a == t && b == p).count() as u64;
                prop_assert_eq!(cm.counts[t][p], n);
            }
            prop_assert_eq!(cm.support(t), truth.iter().filter(|&&a| a == t).count() as u64);
            let m = prf(&cm, t);
            prop_assert_eq!((m.precision, m.recall, m.f1), brute_prf(&truth, &pred, t));
        }
    }

    #[test]
    fn auc_matches_trapezoid_roc(n in 2usize..1000, seed in any::<u64>(), levels in 0u32..4) {
        let mut rng = Rng::new(seed, Stream::Synth);
        let mut pos: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.3).collect();
        pos[0] = true;
        pos[1] = false;
        // coarse levels force ties
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let u = rng.uniform();
                if levels == 0 { u } else { (u * (levels * 3) as f64).floor() }
            })
            .collect();
        let rank = auc_binary(&scores, &pos).unwrap();
        prop_assert!((rank - trapezoid_auc(&scores, &pos)).abs() < 1e-9);

        // any strictly increasing transform leaves it unchanged
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(auc_binary(&warped, &pos).unwrap(), rank);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc_binary(&flipped, &pos).unwrap() - (1.0 - rank)).abs() < 1e-12);
    }

    #[test]
    fn report_is_consistent_and_duplication_invariant(n in 1usize..200, k in 2usize..6, seed in any::<u64>()) {
        let mut rng = Rng::new(seed, Stream::Synth);
        let logits: Vec<f64> = (0..n * k).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let probs: Vec<Vec<f64>> = softmax_rows(&logits, k).chunks(k).map(|c| c.to_vec()).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let pred = Predictions { ids: (0..n).map(|i| i.to_string()).collect(), truth, probs };
        let r = report_from_predictions(&pred, &names(k), "d", "m").unwrap();

        let inc: Vec<_> = r.classes.iter().filter(|c| c.in_macro).collect();
        let mean = |f: &dyn Fn(&&ecg_tinynet::eval::ClassMetrics) -> f64| inc.iter().map(f).sum::<f64>() / inc.len() as f64;
        prop_assert_eq!(r.macro_f1, mean(&|c| c.f1));
        prop_assert_eq!(r.macro_precision, mean(&|c| c.precision));
        prop_assert_eq!(r.macro_recall, mean(&|c| c.recall));
        for (c, m) in r.classes.iter().enumerate() {
            prop_assert_eq!(r.confusion.counts[c].iter().sum::<u64>(), m.support);
        }
        prop_assert_eq!(r.total, n as u64);

        let doubled = Predictions {
            ids: pred.ids.iter().chain(&pred.ids).cloned().collect(),
            truth: pred.truth.iter().chain(&pred.truth).copied().collect(),
            probs: pred.probs.iter().chain(&pred.probs).cloned().collect(),
        };
        let d = report_from_predictions(&doubled, &names(k), "d", "m").unwrap();
        prop_assert_eq!(d.macro_f1, r.macro_f1);
        prop_assert_eq!(d.macro_auc, r.macro_auc);
        for (a, b) in d.classes.iter().zip(&r.classes) {
            prop_assert_eq!((a.precision, a.recall, a.f1, a.auc), (b.precision, b.recall, b.f1, b.auc));
        }
    }
}

#[test]
fn auc_edge_cases() {
    let per = auc_ovr(&[vec![0.9, 0.1], vec![0.8, 0.2]], &[0, 0], 2);
    assert_eq!(per.per_class, [None, None]);
    assert_eq!(per.macro_auc, None);
    let p = auc_ovr(
        &[vec![0.9, 0.1, 0.0], vec![0.2, 0.8, 0.0], vec![0.3, 0.7, 0.0]],
        &[0, 1, 1],
        3,
    );
    assert_eq!(p.per_class, [Some(1.0), Some(1.0), None]);
    assert_eq!(p.macro_auc, Some(1.0));
}

#[test]
fn perfect_predictions_give_unit_scores() {
    let probs = vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8], vec![0.7, 0.2, 0.1]];
    let pred = Predictions {
        ids: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        truth: vec![0, 1, 2, 0],
        probs,
    };
    let r = report_from_predictions(&pred, &names(3), "d", "m").unwrap();
    assert_eq!(r.macro_f1, 1.0);
    for c in &r.classes {
        assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        assert!(!c.zero_division);
    }
    assert!(matches!(
        report_from_predictions(&pred, &names(4), "d", "m"),
        Err(EvalError::Metric(_))
    ));

    // an absent, never-predicted class is excluded from the macro
    let wide = Predictions {
        probs: pred.probs.iter().map(|p| [p.as_slice(), &[0.0]].concat()).collect(),
        ..pred
    };
    let r4 = report_from_predictions(&wide, &names(4), "d", "m").unwrap();
    assert_eq!(r4.macro_f1, 1.0);
    assert!(!r4.classes[3].in_macro && r4.classes[3].zero_division);
}

#[test]
fn evaluate_is_deterministic_across_shards() {
    let data = synth_dataset(&[6, 2, 0], 5, 128, 1, 31);
    let cfg = TrainConfig {
        max_epochs: 2,
        batch_size: 5,
        ..TrainConfig::default()
    };
    let params = fit(tiny_params(1, 3, 9), &data, &data, &cfg, None).unwrap().last;
    let base = evaluate(&params, &data, &EvalConfig::default(), "d", "m").unwrap();
    assert_eq!(base, evaluate(&params, &data, &EvalConfig::default(), "d", "m").unwrap());
    for (shards, batch) in [(1, 1), (3, 4), (15, 2), (100, 64)] {
        let cfg = EvalConfig {
            shards,
            batch_size: batch,
        };
        assert_eq!(evaluate(&params, &data, &cfg, "d", "m").unwrap(), base);
    }
    let (_, pred) = &base;
    for row in &pred.probs {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    assert!(matches!(
        evaluate(&params, &Dataset::default(), &EvalConfig::default(), "d", "m"),
        Err(EvalError::EmptyDataset)
    ));
}
