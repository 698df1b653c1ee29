use rayon::prelude::*;

use super::{add_into, axpy, dot, Padding};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad_left: usize,
}

impl ConvGeom {
    pub fn new(
        n: usize,
        c_in: usize,
        c_out: usize,
        t_in: usize,
        k: usize,
        stride: usize,
        padding: Padding,
    ) -> Option<Self> {
        if stride == 0 || k == 0 {
            return None;
        }
        let (t_out, pad_left) = match padding {
            Padding::Same => {
                let t_out = t_in.div_ceil(stride);
                let needed = ((t_out.saturating_sub(1)) * stride + k).saturating_sub(t_in);
                (t_out, needed / 2)
            }
            Padding::Valid => {
                if t_in < k {
                    return None;
                }
                ((t_in - k) / stride + 1, 0)
            }
        };
        Some(Self {
            n,
            c_in,
            c_out,
            t_in,
            t_out,
            k,
            stride,
            pad_left,
        })
    }

    /// Output positions `t` whose input index `t * stride + tap - pad_left`
    /// falls inside the signal.
    fn valid_range(&self, tap: usize) -> (usize, usize) {
        let lo = if self.pad_left > tap {
            (self.pad_left - tap).div_ceil(self.stride)
        } else {
            0
        };
        // largest t with t * stride + tap - pad_left <= t_in - 1
        let reach = self.t_in + self.pad_left;
        let hi = if reach > tap {
            ((reach - tap - 1) / self.stride + 1).min(self.t_out)
        } else {
            0
        };
        (lo, hi.max(lo))
    }
}

/// Cross-correlation: `y[co, t] = b[co] + sum_{ci, j} w[co, ci, j] * x[ci, t*s + j - pad]`.
pub(crate) fn forward<T: Scalar>(x: &[T], w: &[T], b: Option<&[T]>, g: &ConvGeom) -> Vec<T> {
    let mut y = vec![T::zero(); g.n * g.c_out * g.t_out];
    let x_len = g.c_in * g.t_in;
    y.par_chunks_mut(g.c_out * g.t_out)
        .enumerate()
        .for_each(|(s, ys)| {
            let xs = &x[s * x_len..(s + 1) * x_len];
            for co in 0..g.c_out {
                let row = &mut ys[co * g.t_out..(co + 1) * g.t_out];
                if let Some(b) = b {
                    row.fill(b[co]);
                }
                for ci in 0..g.c_in {
                    let xrow = &xs[ci * g.t_in..(ci + 1) * g.t_in];
                    let wrow = &w[(co * g.c_in + ci) * g.k..(co * g.c_in + ci + 1) * g.k];
                    for (tap, &wv) in wrow.iter().enumerate() {
                        let (lo, hi) = g.valid_range(tap);
                        if lo >= hi {
                            continue;
                        }
                        let start = lo * g.stride + tap - g.pad_left;
                        if g.stride == 1 {
                            axpy(wv, &xrow[start..start + (hi - lo)], &mut row[lo..hi]);
                        } else {
                            for (i, t) in (lo..hi).enumerate() {
                                row[t] += wv * xrow[start + i * g.stride];
                            }
                        }
                    }
                }
            }
        });
    y
}

/// Returns `(grad_x, grad_w, grad_b)`.
pub(crate) fn backward<T: Scalar>(
    x: &[T],
    w: &[T],
    gy: &[T],
    g: &ConvGeom,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let x_len = g.c_in * g.t_in;
    let y_len = g.c_out * g.t_out;
    let w_len = g.c_out * g.c_in * g.k;
    let mut gx = vec![T::zero(); g.n * x_len];
    let partial_w: Vec<Vec<T>> = gx
        .par_chunks_mut(x_len)
        .enumerate()
        .map(|(s, gxs)| {
            let xs = &x[s * x_len..(s + 1) * x_len];
            let gys = &gy[s * y_len..(s + 1) * y_len];
            let mut gw = vec![T::zero(); w_len];
            let mut strided = Vec::new();
            for co in 0..g.c_out {
                let grow = &gys[co * g.t_out..(co + 1) * g.t_out];
                for ci in 0..g.c_in {
                    let xrow = &xs[ci * g.t_in..(ci + 1) * g.t_in];
                    let gxrow = &mut gxs[ci * g.t_in..(ci + 1) * g.t_in];
                    let widx = (co * g.c_in + ci) * g.k;
                    for tap in 0..g.k {
                        let (lo, hi) = g.valid_range(tap);
                        if lo >= hi {
                            continue;
                        }
                        let wv = w[widx + tap];
                        let start = lo * g.stride + tap - g.pad_left;
                        let len = hi - lo;
                        if g.stride == 1 {
                            axpy(wv, &grow[lo..hi], &mut gxrow[start..start + len]);
                            gw[widx + tap] += dot(&grow[lo..hi], &xrow[start..start + len]);
                        } else {
                            strided.clear();
                            strided.extend((0..len).map(|i| xrow[start + i * g.stride]));
                            gw[widx + tap] += dot(&grow[lo..hi], &strided);
                            for (i, t) in (lo..hi).enumerate() {
                                gxrow[start + i * g.stride] += wv * grow[t];
                            }
                        }
                    }
                }
            }
            gw
        })
        .collect();
    let mut gw = vec![T::zero(); w_len];
    for p in &partial_w {
        add_into(&mut gw, p);
    }
    let mut gb = vec![T::zero(); g.c_out];
    for s in 0..g.n {
        for (co, b) in gb.iter_mut().enumerate() {
            let start = s * y_len + co * g.t_out;
            *b += gy[start..start + g.t_out].iter().copied().sum::<T>();
        }
    }
    (gx, gw, gb)
}
