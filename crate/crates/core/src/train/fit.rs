use std::path::Path;
use std::time::Instant;

use log::{info, warn};

use super::{
    adam_step, class_weights, lr_at, EpochRecord, OptimizerState, PlateauState, RunLog,
    TrainConfig, TrainError,
};
use crate::archive::save_weights;
use crate::dataset::Dataset;
use crate::eval::{argmax, predict_dataset, report_from_predictions, EvalConfig};
use crate::model::{forward, BoundParams, ModelParams};
use crate::tensor::{clip_global_norm, weighted_ce, Mode, Rng, Scalar, Stream, Tape};

pub struct FitOutcome<T> {
    /// Parameters from the epoch with the best validation macro-F1.
    pub best: ModelParams<T>,
    /// Parameters after the last completed epoch.
    pub last: ModelParams<T>,
    pub log: RunLog,
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub accuracy: f64,
    /// `(pre-clip, post-clip)` global gradient norm of every step taken.
    pub step_norms: Vec<(f64, f64)>,
    pub skipped_steps: usize,
    /// Visit order of the training samples.
    pub order: Vec<usize>,
}

/// Tensors that receive the L2 term: conv, dense and recurrent weights.
fn decays_with_l2(name: &str) -> bool {
    name.ends_with(".weight") || name.ends_with(".w_ih") || name.ends_with(".w_hh")
}

/// One pass over `train` in a seeded shuffled order. The final partial batch
/// is kept.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch<T: Scalar>(
    params: &mut ModelParams<T>,
    opt: &mut OptimizerState<T>,
    train: &Dataset,
    weights: &[T],
    cfg: &TrainConfig,
    lr: f64,
    epoch: usize,
    dropout: &mut Rng,
) -> Result<EpochStats, TrainError> {
    let mut shuffle = Rng::substream(cfg.seed, Stream::Shuffle, epoch as u64);
    let order = shuffle.permutation(train.len());
    let decay: Vec<bool> = params.tensors().iter().map(|(n, _)| decays_with_l2(n)).collect();
    let mut stats = EpochStats {
        order: order.clone(),
        ..Default::default()
    };
    let (mut loss_sum, mut seen, mut hits) = (0.0, 0usize, 0usize);
    let mut bad_losses = 0;
    for idx in order.chunks(cfg.batch_size) {
        let (x, y) = train.batch::<T>(idx);
        let mut tape = Tape::new();
        let bound = BoundParams::bind(params, &mut tape, true);
        let xv = tape.constant(x);
        let out = forward(params, &bound, &mut tape, xv, Mode::Train, dropout)?;
        let loss = tape.softmax_cross_entropy(out.logits, &y, weights)?;
        let lv = tape.value(loss).data()[0].as_f64();

        let k = tape.shape(out.probs)[1];
        for (row, &t) in tape.value(out.probs).data().chunks(k).zip(&y) {
            let r: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            hits += usize::from(argmax(&r) == t);
        }

        if !lv.is_finite() {
            bad_losses += 1;
            stats.skipped_steps += 1;
            warn!("epoch {epoch}: non-finite loss, step skipped");
            if bad_losses >= 2 {
                return Err(TrainError::DivergedLoss { epoch });
            }
            continue;
        }
        bad_losses = 0;
        loss_sum += lv * idx.len() as f64;
        seen += idx.len();

        let mut grads = tape.backward(loss)?;
        let mut g: Vec<Vec<T>> = bound
            .iter()
            .map(|(_, v)| {
                grads
                    .take(v)
                    .map(|t| t.into_data())
                    .unwrap_or_default()
            })
            .collect();
        for (gi, (_, t)) in g.iter_mut().zip(params.tensors()) {
            if gi.is_empty() {
                *gi = vec![T::zero(); t.len()];
            }
        }
        if !g.iter().flatten().all(|v| v.is_finite()) {
            stats.skipped_steps += 1;
            warn!(
                "{}",
                TrainError::NonFiniteGradient {
                    step: opt.step + 1
                }
            );
            continue;
        }
        let pre = {
            let mut refs: Vec<&mut [T]> = g.iter_mut().map(|v| &mut v[..]).collect();
            clip_global_norm(&mut refs, cfg.clip_norm)
        };
        let post = crate::tensor::global_norm(&g.iter().map(|v| &v[..]).collect::<Vec<_>>());
        stats.step_norms.push((pre, post));

        let grefs: Vec<&[T]> = g.iter().map(|v| &v[..]).collect();
        let mut prefs: Vec<&mut [T]> = params.tensors_mut().map(|(_, t)| t.data_mut()).collect();
        adam_step(&mut prefs, &grefs, &decay, opt, lr, cfg.l2);
        params.apply_bn_stats(&out.bn_stats);
    }
    stats.mean_loss = if seen > 0 { loss_sum / seen as f64 } else { f64::NAN };
    stats.accuracy = hits as f64 / train.len().max(1) as f64;
    Ok(stats)
}

/// Train with seeded shuffling, weighted cross-entropy, gradient clipping,
/// Adam with L2, the step and plateau schedules, and early stopping on
/// validation macro-F1. Improved epochs are checkpointed to
/// `checkpoint_dir` when given.
pub fn fit<T: Scalar>(
    mut params: ModelParams<T>,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<FitOutcome<T>, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptyDataset("validation"));
    }
    let k = params.config().num_classes;
    let w64 = class_weights(&train.labels(), k, cfg.class_weight_mode);
    let weights: Vec<T> = w64.iter().map(|&w| T::lit(w)).collect();
    let sizes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
    let mut opt = OptimizerState::new(&sizes, cfg.adam);
    let mut plateau = PlateauState::default();
    let mut dropout = Rng::new(cfg.seed, Stream::Dropout);
    let names: Vec<String> = (0..k).map(|i| params.config().class_name(i)).collect();
    let eval_cfg = EvalConfig::default();

    let mut log = RunLog::default();
    let mut best = params.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut since_best = 0;
    log.stop_reason = "max_epochs".into();

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let lr = lr_at(epoch, cfg, &plateau);
        let stats = train_epoch(&mut params, &mut opt, train, &weights, cfg, lr, epoch, &mut dropout)?;

        let pred = predict_dataset(&params, val, &eval_cfg)?;
        let flat: Vec<f64> = pred.probs.iter().flatten().copied().collect();
        let val_loss = weighted_ce(&flat, &pred.truth, &w64, k)?;
        let report = report_from_predictions(&pred, &names, "val", "")?;
        let f1 = report.macro_f1;

        let improved = f1 > best_f1;
        if improved {
            best_f1 = f1;
            best = params.clone();
            since_best = 0;
            log.best_epoch = Some(epoch);
            if let Some(dir) = checkpoint_dir {
                let path = dir.join(format!("epoch_{epoch:03}.ecgw"));
                save_weights(&params, &path).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
                log.checkpoints.push(path.display().to_string());
            }
        } else {
            since_best += 1;
        }
        if plateau.observe(f1, &cfg.plateau) {
            info!("epoch {epoch}: plateau, lr multiplier now {}", plateau.multiplier);
        }

        let max_grad_norm = stats.step_norms.iter().map(|s| s.0).fold(0.0, f64::max);
        let record = EpochRecord {
            epoch,
            train_loss: stats.mean_loss,
            val_loss,
            val_macro_f1: f1,
            train_accuracy: stats.accuracy,
            lr,
            wall_time_s: started.elapsed().as_secs_f64(),
            max_grad_norm,
            improved,
        };
        info!(
            "epoch {epoch}: loss {:.4} val_loss {:.4} val_f1 {:.4} lr {:.2e}",
            record.train_loss, record.val_loss, f1, lr
        );
        if let Some(dir) = checkpoint_dir {
            RunLog::append_jsonl(&dir.join("runlog.jsonl"), &record)?;
        }
        log.epochs.push(record);

        if cfg.target_val_f1.is_some_and(|t| f1 >= t) {
            log.stop_reason = "target_val_f1".into();
            break;
        }
        if since_best >= cfg.early_stop_patience {
            log.stop_reason = "early_stopping".into();
            break;
        }
    }
    if let Some(dir) = checkpoint_dir {
        std::fs::write(dir.join("runlog.csv"), log.to_csv())?;
        if log.best_epoch.is_some() {
            save_weights(&best, &dir.join("best.ecgw"))
                .map_err(|e| TrainError::Checkpoint(e.to_string()))?;
        }
    }
    Ok(FitOutcome {
        best,
        last: params,
        log,
    })
}
