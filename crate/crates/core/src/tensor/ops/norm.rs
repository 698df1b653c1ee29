use serde::{Deserialize, Serialize};

use crate::tensor::Scalar;

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.9;

/// Running statistics of one batch-norm layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Number of training batches folded into the running statistics.
    pub num_batches_tracked: u64,
}

/// Per-channel statistics of a single training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Scalar> BnState<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            num_batches_tracked: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    pub fn is_initialized(&self) -> bool {
        self.num_batches_tracked > 0
    }

    /// `running = momentum * running + (1 - momentum) * batch`
    pub fn update(&mut self, stats: &BatchStats<T>) {
        let m = T::lit(BN_MOMENTUM);
        let one_m = T::one() - m;
        for (r, &b) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = m * *r + one_m * b;
        }
        for (r, &b) in self.running_var.iter_mut().zip(&stats.var) {
            *r = m * *r + one_m * b;
        }
        self.num_batches_tracked += 1;
    }
}

pub(crate) struct NormForward<T> {
    pub y: Vec<T>,
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub stats: Option<BatchStats<T>>,
}

/// `x` is `[n, c, t]`. With `running = None` the batch statistics are used
/// (biased variance) and returned.
pub(crate) fn forward<T: Scalar>(
    x: &[T],
    gamma: &[T],
    beta: &[T],
    n: usize,
    c: usize,
    t: usize,
    running: Option<(&[T], &[T])>,
) -> NormForward<T> {
    let eps = T::lit(BN_EPS);
    let count = T::lit((n * t) as f64);
    let (mean, var, stats) = match running {
        Some((m, v)) => (m.to_vec(), v.to_vec(), None),
        None => {
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for ch in 0..c {
                let mut acc = T::zero();
                for s in 0..n {
                    let base = (s * c + ch) * t;
                    acc += x[base..base + t].iter().copied().sum::<T>();
                }
                let mu = acc / count;
                let mut sq = T::zero();
                for s in 0..n {
                    let base = (s * c + ch) * t;
                    for &v in &x[base..base + t] {
                        let d = v - mu;
                        sq += d * d;
                    }
                }
                mean[ch] = mu;
                var[ch] = sq / count;
            }
            (
                mean.clone(),
                var.clone(),
                Some(BatchStats { mean, var }),
            )
        }
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for s in 0..n {
        for ch in 0..c {
            let base = (s * c + ch) * t;
            for i in base..base + t {
                let h = (x[i] - mean[ch]) * inv_std[ch];
                xhat[i] = h;
                y[i] = gamma[ch] * h + beta[ch];
            }
        }
    }
    NormForward {
        y,
        xhat,
        inv_std,
        stats,
    }
}

/// Returns `(grad_x, grad_gamma, grad_beta)`. `batch_stats` selects the
/// training-mode rule where mean and variance depend on `x`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Scalar>(
    gy: &[T],
    xhat: &[T],
    inv_std: &[T],
    gamma: &[T],
    n: usize,
    c: usize,
    t: usize,
    batch_stats: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let count = T::lit((n * t) as f64);
    let mut gx = vec![T::zero(); gy.len()];
    let mut gg = vec![T::zero(); c];
    let mut gb = vec![T::zero(); c];
    for ch in 0..c {
        let mut sum_g = T::zero();
        let mut sum_gh = T::zero();
        for s in 0..n {
            let base = (s * c + ch) * t;
            for i in base..base + t {
                sum_g += gy[i];
                sum_gh += gy[i] * xhat[i];
            }
        }
        gg[ch] = sum_gh;
        gb[ch] = sum_g;
        let scale = gamma[ch] * inv_std[ch];
        for s in 0..n {
            let base = (s * c + ch) * t;
            for i in base..base + t {
                gx[i] = if batch_stats {
                    scale * (gy[i] - sum_g / count - xhat[i] * sum_gh / count)
                } else {
                    scale * gy[i]
                };
            }
        }
    }
    (gx, gg, gb)
}
