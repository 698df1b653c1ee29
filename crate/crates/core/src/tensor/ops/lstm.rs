//! Single-direction LSTM over `[n, features, t]` inputs.
//!
//! Gate order inside the stacked `4d` rows is input, forget, cell, output.
//! The reverse direction scans `t = T-1 .. 0` but writes each hidden state
//! back at its own time index, so both directions stay time-aligned.

use rayon::prelude::*;

use super::{add_into, axpy, dot, sigmoid};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmGeom {
    pub n: usize,
    pub features: usize,
    pub hidden: usize,
    pub t: usize,
    pub reverse: bool,
}

impl LstmGeom {
    fn order(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.t).map(move |s| if self.reverse { self.t - 1 - s } else { s })
    }
}

/// Per-sample activations kept for backpropagation through time, each
/// indexed by original time step.
pub(crate) struct LstmCache<T> {
    /// `[n][t][4d]` post-activation gates.
    gates: Vec<T>,
    /// `[n][t][d]` cell states.
    cells: Vec<T>,
    /// `[n][t][d]` hidden states.
    hidden: Vec<T>,
}

/// Returns output `[n, d, t]` and the cache.
pub(crate) fn forward<T: Scalar>(
    x: &[T],
    w_ih: &[T],
    w_hh: &[T],
    b: &[T],
    g: &LstmGeom,
) -> (Vec<T>, LstmCache<T>) {
    let (f, d, t) = (g.features, g.hidden, g.t);
    let per: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..g.n)
        .into_par_iter()
        .map(|s| {
            let xs = &x[s * f * t..(s + 1) * f * t];
            let mut gates = vec![T::zero(); t * 4 * d];
            let mut cells = vec![T::zero(); t * d];
            let mut hidden = vec![T::zero(); t * d];
            let mut xt = vec![T::zero(); f];
            let mut h_prev = vec![T::zero(); d];
            let mut c_prev = vec![T::zero(); d];
            for step in g.order() {
                for (i, v) in xt.iter_mut().enumerate() {
                    *v = xs[i * t + step];
                }
                let z = &mut gates[step * 4 * d..(step + 1) * 4 * d];
                for (r, zr) in z.iter_mut().enumerate() {
                    *zr = b[r]
                        + dot(&w_ih[r * f..(r + 1) * f], &xt)
                        + dot(&w_hh[r * d..(r + 1) * d], &h_prev);
                }
                for j in 0..d {
                    let ig = sigmoid(z[j]);
                    let fg = sigmoid(z[d + j]);
                    let cg = z[2 * d + j].tanh();
                    let og = sigmoid(z[3 * d + j]);
                    z[j] = ig;
                    z[d + j] = fg;
                    z[2 * d + j] = cg;
                    z[3 * d + j] = og;
                    let c = fg * c_prev[j] + ig * cg;
                    cells[step * d + j] = c;
                    hidden[step * d + j] = og * c.tanh();
                }
                c_prev.copy_from_slice(&cells[step * d..(step + 1) * d]);
                h_prev.copy_from_slice(&hidden[step * d..(step + 1) * d]);
            }
            (gates, cells, hidden)
        })
        .collect();
    let mut out = vec![T::zero(); g.n * d * t];
    let mut cache = LstmCache {
        gates: Vec::with_capacity(g.n * t * 4 * d),
        cells: Vec::with_capacity(g.n * t * d),
        hidden: Vec::with_capacity(g.n * t * d),
    };
    for (s, (gates, cells, hidden)) in per.into_iter().enumerate() {
        let os = &mut out[s * d * t..(s + 1) * d * t];
        for step in 0..t {
            for j in 0..d {
                os[j * t + step] = hidden[step * d + j];
            }
        }
        cache.gates.extend(gates);
        cache.cells.extend(cells);
        cache.hidden.extend(hidden);
    }
    (out, cache)
}

/// Backpropagation through time. Returns `(gx, g_w_ih, g_w_hh, g_b)`.
pub(crate) fn backward<T: Scalar>(
    x: &[T],
    w_ih: &[T],
    w_hh: &[T],
    gy: &[T],
    cache: &LstmCache<T>,
    g: &LstmGeom,
) -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>) {
    let (f, d, t) = (g.features, g.hidden, g.t);
    let mut gx = vec![T::zero(); g.n * f * t];
    let partials: Vec<(Vec<T>, Vec<T>, Vec<T>)> = gx
        .par_chunks_mut(f * t)
        .enumerate()
        .map(|(s, gxs)| {
            let xs = &x[s * f * t..(s + 1) * f * t];
            let gys = &gy[s * d * t..(s + 1) * d * t];
            let gates = &cache.gates[s * t * 4 * d..(s + 1) * t * 4 * d];
            let cells = &cache.cells[s * t * d..(s + 1) * t * d];
            let hidden = &cache.hidden[s * t * d..(s + 1) * t * d];
            let mut g_ih = vec![T::zero(); 4 * d * f];
            let mut g_hh = vec![T::zero(); 4 * d * d];
            let mut g_b = vec![T::zero(); 4 * d];
            let mut dh_next = vec![T::zero(); d];
            let mut dc_next = vec![T::zero(); d];
            let mut dz = vec![T::zero(); 4 * d];
            let mut xt = vec![T::zero(); f];
            let mut gxt = vec![T::zero(); f];
            let zeros = vec![T::zero(); d];
            let order: Vec<usize> = g.order().collect();
            for (pos, &step) in order.iter().enumerate().rev() {
                let (h_prev, c_prev) = if pos == 0 {
                    (&zeros[..], &zeros[..])
                } else {
                    let p = order[pos - 1];
                    (&hidden[p * d..(p + 1) * d], &cells[p * d..(p + 1) * d])
                };
                let gt = &gates[step * 4 * d..(step + 1) * 4 * d];
                for j in 0..d {
                    let (ig, fg, cg, og) = (gt[j], gt[d + j], gt[2 * d + j], gt[3 * d + j]);
                    let c = cells[step * d + j];
                    let tc = c.tanh();
                    let dh = gys[j * t + step] + dh_next[j];
                    let dog = dh * tc;
                    let dc = dh * og * (T::one() - tc * tc) + dc_next[j];
                    let dig = dc * cg;
                    let dcg = dc * ig;
                    let dfg = dc * c_prev[j];
                    dc_next[j] = dc * fg;
                    dz[j] = dig * ig * (T::one() - ig);
                    dz[d + j] = dfg * fg * (T::one() - fg);
                    dz[2 * d + j] = dcg * (T::one() - cg * cg);
                    dz[3 * d + j] = dog * og * (T::one() - og);
                }
                for (i, v) in xt.iter_mut().enumerate() {
                    *v = xs[i * t + step];
                }
                gxt.fill(T::zero());
                dh_next.fill(T::zero());
                for (r, &dzr) in dz.iter().enumerate() {
                    g_b[r] += dzr;
                    axpy(dzr, &xt, &mut g_ih[r * f..(r + 1) * f]);
                    axpy(dzr, h_prev, &mut g_hh[r * d..(r + 1) * d]);
                    axpy(dzr, &w_ih[r * f..(r + 1) * f], &mut gxt);
                    axpy(dzr, &w_hh[r * d..(r + 1) * d], &mut dh_next);
                }
                for (i, &v) in gxt.iter().enumerate() {
                    gxs[i * t + step] += v;
                }
            }
            (g_ih, g_hh, g_b)
        })
        .collect();
    let mut g_ih = vec![T::zero(); 4 * d * f];
    let mut g_hh = vec![T::zero(); 4 * d * d];
    let mut g_b = vec![T::zero(); 4 * d];
    for (a, b2, c) in &partials {
        add_into(&mut g_ih, a);
        add_into(&mut g_hh, b2);
        add_into(&mut g_b, c);
    }
    (gx, g_ih, g_hh, g_b)
}
