//! Forward and backward kernels. The tape owns bookkeeping; these functions
//! only map slices to slices.

pub(crate) mod conv;
pub(crate) mod lstm;
pub(crate) mod norm;

pub use norm::{BatchStats, BnState};

use serde::{Deserialize, Serialize};

use super::Scalar;

/// Layer behavior switch for dropout and batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Output length `ceil(T / stride)`, zero padding split with the extra
    /// sample on the right.
    Same,
    Valid,
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Softmax over the last axis of a `[rows, k]` buffer.
pub fn softmax_rows<T: Scalar>(x: &[T], k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (row, dst) in x.chunks(k).zip(out.chunks_mut(k)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            total += *d;
        }
        for d in dst.iter_mut() {
            *d /= total;
        }
    }
    out
}

/// Max pooling over the time axis of `[rows, t]`. Returns outputs and the
/// flat argmax index for each output (first maximal index wins).
pub(crate) fn maxpool_forward<T: Scalar>(
    x: &[T],
    rows: usize,
    t_in: usize,
    pool: usize,
    stride: usize,
) -> (Vec<T>, Vec<usize>) {
    let t_out = (t_in - pool) / stride + 1;
    let mut out = Vec::with_capacity(rows * t_out);
    let mut arg = Vec::with_capacity(rows * t_out);
    for r in 0..rows {
        let base = r * t_in;
        for t in 0..t_out {
            let start = base + t * stride;
            let mut best = start;
            for i in start + 1..start + pool {
                if x[i] > x[best] {
                    best = i;
                }
            }
            out.push(x[best]);
            arg.push(best);
        }
    }
    (out, arg)
}

/// `y[n, o] = sum_i w[o, i] * x[n, i] + b[o]`
pub(crate) fn dense_forward<T: Scalar>(
    x: &[T],
    w: &[T],
    b: &[T],
    n: usize,
    fan_in: usize,
    fan_out: usize,
) -> Vec<T> {
    let mut y = vec![T::zero(); n * fan_out];
    for s in 0..n {
        let xs = &x[s * fan_in..(s + 1) * fan_in];
        for o in 0..fan_out {
            let wo = &w[o * fan_in..(o + 1) * fan_in];
            y[s * fan_out + o] = dot(wo, xs) + b[o];
        }
    }
    y
}

pub(crate) fn dense_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    gy: &[T],
    n: usize,
    fan_in: usize,
    fan_out: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut gx = vec![T::zero(); n * fan_in];
    let mut gw = vec![T::zero(); fan_out * fan_in];
    let mut gb = vec![T::zero(); fan_out];
    for s in 0..n {
        let xs = &x[s * fan_in..(s + 1) * fan_in];
        let gxs = &mut gx[s * fan_in..(s + 1) * fan_in];
        for o in 0..fan_out {
            let g = gy[s * fan_out + o];
            gb[o] += g;
            axpy(g, &w[o * fan_in..(o + 1) * fan_in], gxs);
            axpy(g, xs, &mut gw[o * fan_in..(o + 1) * fan_in]);
        }
    }
    (gx, gw, gb)
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (d, &s) in y.iter_mut().zip(x) {
        *d += alpha * s;
    }
}

pub(crate) fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
