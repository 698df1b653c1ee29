use serde::{Deserialize, Serialize};

use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment buffers, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
    pub config: AdamConfig,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(sizes: &[usize], config: AdamConfig) -> Self {
        Self {
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update. `decay[i]` selects the tensors that get
/// the L2 term `l2 * theta` added to their gradient before the moments.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    decay: &[bool],
    state: &mut OptimizerState<T>,
    lr: f64,
    l2: f64,
) {
    state.step += 1;
    let c = state.config;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let bc1 = T::lit(1.0 - c.beta1.powi(state.step as i32));
    let bc2 = T::lit(1.0 - c.beta2.powi(state.step as i32));
    let (lr, eps, l2) = (T::lit(lr), T::lit(c.eps), T::lit(l2));
    for (i, theta) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..theta.len() {
            let mut g = grads[i][j];
            if decay[i] {
                g += l2 * theta[j];
            }
            m[j] = b1 * m[j] + one_b1 * g;
            v[j] = b2 * v[j] + one_b2 * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
