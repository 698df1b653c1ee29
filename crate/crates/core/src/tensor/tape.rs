use super::ops::conv::{self, ConvGeom};
use super::ops::lstm::{self, LstmCache, LstmGeom};
use super::ops::norm::{self, BatchStats, BnState};
use super::ops::{
    add_into, dense_backward, dense_forward, maxpool_forward, sigmoid, softmax_rows, Mode,
    Padding,
};
use super::{shape_err, Rng, Scalar, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Mul {
        a: Var,
        b: Var,
        broadcast: bool,
    },
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    Sum(Var),
    Gap(Var),
    Concat(Var, Var),
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    Dense {
        x: Var,
        w: Var,
        b: Var,
    },
    Lstm {
        x: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
        geom: LstmGeom,
        cache: LstmCache<T>,
    },
    SoftmaxCe {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<T>,
        probs: Vec<T>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    op: Op<T>,
}

/// Records operations in execution order; [`Tape::backward`] replays them in
/// exact reverse order, accumulating gradients additively on fan-out.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar output with respect to every recorded value that
/// requires them.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<Tensor<T>> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(g.clone(), &self.shapes[v.0]).expect("gradient shape"))
    }

    pub fn slice(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads[v.0]
            .take()
            .map(|g| Tensor::new(g, &self.shapes[v.0]).expect("gradient shape"))
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable input; gradients are reported for it.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad: true,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad: false,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn expect_rank(&self, op: &'static str, v: Var, rank: usize) -> Result<&[usize], TensorError> {
        let s = self.shape(v);
        if s.len() != rank {
            return Err(shape_err(op, format!("expected rank {rank}, got {s:?}")));
        }
        Ok(s)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                "add",
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let value = Tensor::new(data, self.shape(a))?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Element-wise product. `b` may also be `[n, 1, t]` against an
    /// `[n, c, t]` operand, broadcasting across channels.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let broadcast = if sa == sb {
            false
        } else if sa.len() == 3 && sb.len() == 3 && sb[1] == 1 && sa[0] == sb[0] && sa[2] == sb[2]
        {
            true
        } else {
            return Err(shape_err("mul", format!("{sa:?} vs {sb:?}")));
        };
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let data = if broadcast {
            let (n, c, t) = (sa[0], sa[1], sa[2]);
            let mut out = Vec::with_capacity(av.len());
            for s in 0..n {
                for ch in 0..c {
                    let arow = &av[(s * c + ch) * t..(s * c + ch + 1) * t];
                    let brow = &bv[s * t..(s + 1) * t];
                    out.extend(arow.iter().zip(brow).map(|(&x, &y)| x * y));
                }
            }
            out
        } else {
            av.iter().zip(bv).map(|(&x, &y)| x * y).collect()
        };
        let value = Tensor::new(data, &sa)?;
        Ok(self.push(value, Op::Mul { a, b, broadcast }, &[a, b]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self
            .value(x)
            .map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(value, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.push(value, Op::Sigmoid(x), &[x])
    }

    /// Softmax over the last axis, max-subtracted.
    pub fn softmax(&mut self, x: Var) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        let k = *shape
            .last()
            .ok_or_else(|| shape_err("softmax", "scalar input"))?;
        let data = softmax_rows(self.value(x).data(), k);
        let value = Tensor::new(data, &shape)?;
        Ok(self.push(value, Op::Softmax(x), &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x), &[x])
    }

    /// Global average pooling over time: `[n, c, t] -> [n, c]`.
    pub fn gap(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.expect_rank("gap", x, 3)?.to_vec();
        let (n, c, t) = (s[0], s[1], s[2]);
        if t == 0 {
            return Err(shape_err("gap", "empty time axis"));
        }
        let inv = T::one() / T::lit(t as f64);
        let data = self
            .value(x)
            .data()
            .chunks(t)
            .map(|row| row.iter().copied().sum::<T>() * inv)
            .collect();
        let value = Tensor::new(data, &[n, c])?;
        Ok(self.push(value, Op::Gap(x), &[x]))
    }

    /// Concatenate `[n, ca, t]` and `[n, cb, t]` along channels.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let sa = self.expect_rank("concat", a, 3)?.to_vec();
        let sb = self.expect_rank("concat", b, 3)?.to_vec();
        if sa[0] != sb[0] || sa[2] != sb[2] {
            return Err(shape_err("concat", format!("{sa:?} vs {sb:?}")));
        }
        let (n, t) = (sa[0], sa[2]);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(av.len() + bv.len());
        for s in 0..n {
            data.extend_from_slice(&av[s * sa[1] * t..(s + 1) * sa[1] * t]);
            data.extend_from_slice(&bv[s * sb[1] * t..(s + 1) * sb[1] * t]);
        }
        let value = Tensor::new(data, &[n, sa[1] + sb[1], t])?;
        Ok(self.push(value, Op::Concat(a, b), &[a, b]))
    }

    /// 1-D cross-correlation. `x: [n, c_in, t]`, `w: [c_out, c_in, k]`,
    /// `b: [c_out]`.
    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: Padding,
    ) -> Result<Var, TensorError> {
        let sx = self.expect_rank("conv1d", x, 3)?.to_vec();
        let sw = self.expect_rank("conv1d", w, 3)?.to_vec();
        if sw[1] != sx[1] {
            return Err(shape_err(
                "conv1d",
                format!("input has {} channels, kernel expects {}", sx[1], sw[1]),
            ));
        }
        if let Some(b) = b {
            if self.shape(b) != [sw[0]] {
                return Err(shape_err(
                    "conv1d",
                    format!("bias {:?} for {} filters", self.shape(b), sw[0]),
                ));
            }
        }
        let geom = ConvGeom::new(sx[0], sx[1], sw[0], sx[2], sw[2], stride, padding)
            .ok_or_else(|| {
                shape_err(
                    "conv1d",
                    format!("kernel {} stride {stride} on length {}", sw[2], sx[2]),
                )
            })?;
        let y = conv::forward(
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &geom,
        );
        let value = Tensor::new(y, &[geom.n, geom.c_out, geom.t_out])?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(value, Op::Conv1d { x, w, b, geom }, &inputs))
    }

    /// Batch normalization over batch and time for `[n, c, t]`. Training
    /// mode normalizes with batch statistics and returns them so the caller
    /// can fold them into `state`; eval mode reads the running statistics.
    pub fn batchnorm1d(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &BnState<T>,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats<T>>), TensorError> {
        let s = self.expect_rank("batchnorm1d", x, 3)?.to_vec();
        let (n, c, t) = (s[0], s[1], s[2]);
        if self.shape(gamma) != [c] || self.shape(beta) != [c] || state.channels() != c {
            return Err(shape_err("batchnorm1d", format!("{c} channels")));
        }
        let running = match mode {
            Mode::Train => None,
            Mode::Eval => {
                if !state.is_initialized() {
                    return Err(TensorError::UninitializedState);
                }
                Some((&state.running_mean[..], &state.running_var[..]))
            }
        };
        let fw = norm::forward(
            self.value(x).data(),
            self.value(gamma).data(),
            self.value(beta).data(),
            n,
            c,
            t,
            running,
        );
        let value = Tensor::new(fw.y, &s)?;
        let var = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat: fw.xhat,
                inv_std: fw.inv_std,
                batch_stats: mode == Mode::Train,
            },
            &[x, gamma, beta],
        );
        Ok((var, fw.stats))
    }

    pub fn maxpool1d(&mut self, x: Var, pool: usize, stride: usize) -> Result<Var, TensorError> {
        let s = self.expect_rank("maxpool1d", x, 3)?.to_vec();
        if pool == 0 || stride == 0 || s[2] < pool {
            return Err(shape_err(
                "maxpool1d",
                format!("pool {pool} stride {stride} on length {}", s[2]),
            ));
        }
        let (y, argmax) = maxpool_forward(self.value(x).data(), s[0] * s[1], s[2], pool, stride);
        let t_out = (s[2] - pool) / stride + 1;
        let value = Tensor::new(y, &[s[0], s[1], t_out])?;
        Ok(self.push(value, Op::MaxPool { x, argmax }, &[x]))
    }

    /// Inverted dropout. Identity in eval mode or when `p == 0`, and then no
    /// random numbers are drawn.
    pub fn dropout(&mut self, x: Var, p: f64, mode: Mode, rng: &mut Rng) -> Var {
        if mode == Mode::Eval || p <= 0.0 {
            return x;
        }
        let keep = T::lit(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if rng.uniform() >= p { keep } else { T::zero() })
            .collect();
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let value = Tensor::new(data, self.shape(x)).expect("same shape");
        self.push(value, Op::Dropout { x, mask }, &[x])
    }

    /// Fully connected layer: `x: [n, in]`, `w: [out, in]`, `b: [out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let sx = self.expect_rank("dense", x, 2)?.to_vec();
        let sw = self.expect_rank("dense", w, 2)?.to_vec();
        if sw[1] != sx[1] || self.shape(b) != [sw[0]] {
            return Err(shape_err(
                "dense",
                format!("x {sx:?}, w {sw:?}, b {:?}", self.shape(b)),
            ));
        }
        let y = dense_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            sx[0],
            sx[1],
            sw[0],
        );
        let value = Tensor::new(y, &[sx[0], sw[0]])?;
        Ok(self.push(value, Op::Dense { x, w, b }, &[x, w, b]))
    }

    /// One LSTM direction over `x: [n, features, t]` with zero initial
    /// state. `w_ih: [4d, features]`, `w_hh: [4d, d]`, `b: [4d]`; returns
    /// `[n, d, t]`.
    pub fn lstm(
        &mut self,
        x: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
        reverse: bool,
    ) -> Result<Var, TensorError> {
        let sx = self.expect_rank("lstm", x, 3)?.to_vec();
        let sh = self.expect_rank("lstm", w_hh, 2)?.to_vec();
        let d = sh[1];
        if sh[0] != 4 * d
            || self.shape(w_ih) != [4 * d, sx[1]]
            || self.shape(b) != [4 * d]
        {
            return Err(shape_err(
                "lstm",
                format!(
                    "x {sx:?}, w_ih {:?}, w_hh {sh:?}, b {:?}",
                    self.shape(w_ih),
                    self.shape(b)
                ),
            ));
        }
        let geom = LstmGeom {
            n: sx[0],
            features: sx[1],
            hidden: d,
            t: sx[2],
            reverse,
        };
        let (y, cache) = lstm::forward(
            self.value(x).data(),
            self.value(w_ih).data(),
            self.value(w_hh).data(),
            self.value(b).data(),
            &geom,
        );
        let value = Tensor::new(y, &[sx[0], d, sx[2]])?;
        Ok(self.push(
            value,
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b,
                geom,
                cache,
            },
            &[x, w_ih, w_hh, b],
        ))
    }

    /// Forward and reverse LSTM over the same input, concatenated per time
    /// step: `[n, d_fwd + d_bwd, t]`. Each direction is `(w_ih, w_hh, b)`.
    pub fn bilstm(
        &mut self,
        x: Var,
        fwd: (Var, Var, Var),
        bwd: (Var, Var, Var),
    ) -> Result<Var, TensorError> {
        let f = self.lstm(x, fwd.0, fwd.1, fwd.2, false)?;
        let b = self.lstm(x, bwd.0, bwd.1, bwd.2, true)?;
        self.concat_channels(f, b)
    }

    /// Mean over the batch of `-w[y] * ln(clip(softmax(logits)[y]))`, with
    /// probabilities clipped to `[1e-7, 1 - 1e-7]`. The gradient is taken
    /// directly at the logits.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        weights: &[T],
    ) -> Result<Var, TensorError> {
        let s = self.expect_rank("softmax_cross_entropy", logits, 2)?.to_vec();
        let (n, k) = (s[0], s[1]);
        if targets.len() != n || weights.len() != k {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("{n} rows, {} targets, {} weights", targets.len(), weights.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&y| y >= k) {
            return Err(TensorError::IndexOutOfRange {
                index: bad,
                classes: k,
            });
        }
        let probs = softmax_rows(self.value(logits).data(), k);
        let loss = weighted_ce(&probs, targets, weights, k)?;
        let value = Tensor::scalar(loss);
        Ok(self.push(
            value,
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, out: Var) -> Result<Gradients<T>, TensorError> {
        if self.value(out).len() != 1 {
            return Err(TensorError::NonScalarOutput(self.shape(out).to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(vec![T::one()]);
        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[i].take() else {
                continue;
            };
            self.backward_node(node, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => add_into(existing, &g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backward_node(&self, node: &Node<T>, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gy.to_vec());
                self.accumulate(grads, *b, gy.to_vec());
            }
            Op::Mul { a, b, broadcast } => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                if *broadcast {
                    let s = self.shape(*a);
                    let (n, c, t) = (s[0], s[1], s[2]);
                    let mut ga = vec![T::zero(); av.len()];
                    let mut gb = vec![T::zero(); bv.len()];
                    for smp in 0..n {
                        for ch in 0..c {
                            let base = (smp * c + ch) * t;
                            for j in 0..t {
                                ga[base + j] = gy[base + j] * bv[smp * t + j];
                                gb[smp * t + j] += gy[base + j] * av[base + j];
                            }
                        }
                    }
                    self.accumulate(grads, *a, ga);
                    self.accumulate(grads, *b, gb);
                } else {
                    let ga = gy.iter().zip(bv).map(|(&g, &y)| g * y).collect();
                    let gb = gy.iter().zip(av).map(|(&g, &x)| g * x).collect();
                    self.accumulate(grads, *a, ga);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                let g = gy
                    .iter()
                    .zip(xv)
                    .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                self.accumulate(grads, *x, g);
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                let g = gy
                    .iter()
                    .zip(y)
                    .map(|(&g, &s)| g * s * (T::one() - s))
                    .collect();
                self.accumulate(grads, *x, g);
            }
            Op::Softmax(x) => {
                let k = *node.value.shape().last().expect("softmax rank");
                let y = node.value.data();
                let mut g = vec![T::zero(); y.len()];
                for ((yr, gr), out) in y.chunks(k).zip(gy.chunks(k)).zip(g.chunks_mut(k)) {
                    let inner: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for ((o, &yy), &gg) in out.iter_mut().zip(yr).zip(gr) {
                        *o = yy * (gg - inner);
                    }
                }
                self.accumulate(grads, *x, g);
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                self.accumulate(grads, *x, vec![gy[0]; n]);
            }
            Op::Gap(x) => {
                let s = self.shape(*x);
                let t = s[2];
                let inv = T::one() / T::lit(t as f64);
                let mut g = Vec::with_capacity(s.iter().product());
                for &gv in gy {
                    g.extend(std::iter::repeat(gv * inv).take(t));
                }
                self.accumulate(grads, *x, g);
            }
            Op::Concat(a, b) => {
                let sa = self.shape(*a);
                let sb = self.shape(*b);
                let (n, t) = (sa[0], sa[2]);
                let (ca, cb) = (sa[1] * t, sb[1] * t);
                let mut ga = Vec::with_capacity(n * ca);
                let mut gb = Vec::with_capacity(n * cb);
                for s in 0..n {
                    let base = s * (ca + cb);
                    ga.extend_from_slice(&gy[base..base + ca]);
                    gb.extend_from_slice(&gy[base + ca..base + ca + cb]);
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Conv1d { x, w, b, geom } => {
                let (gx, gw, gb) =
                    conv::backward(self.value(*x).data(), self.value(*w).data(), gy, geom);
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *w, gw);
                if let Some(b) = b {
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let s = self.shape(*x);
                let (gx, gg, gb) = norm::backward(
                    gy,
                    xhat,
                    inv_std,
                    self.value(*gamma).data(),
                    s[0],
                    s[1],
                    s[2],
                    *batch_stats,
                );
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *gamma, gg);
                self.accumulate(grads, *beta, gb);
            }
            Op::MaxPool { x, argmax } => {
                let mut g = vec![T::zero(); self.value(*x).len()];
                for (&idx, &gv) in argmax.iter().zip(gy) {
                    g[idx] += gv;
                }
                self.accumulate(grads, *x, g);
            }
            Op::Dropout { x, mask } => {
                let g = gy.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                self.accumulate(grads, *x, g);
            }
            Op::Dense { x, w, b } => {
                let sx = self.shape(*x);
                let sw = self.shape(*w);
                let (gx, gw, gb) = dense_backward(
                    self.value(*x).data(),
                    self.value(*w).data(),
                    gy,
                    sx[0],
                    sx[1],
                    sw[0],
                );
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *w, gw);
                self.accumulate(grads, *b, gb);
            }
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b,
                geom,
                cache,
            } => {
                let (gx, gih, ghh, gb) = lstm::backward(
                    self.value(*x).data(),
                    self.value(*w_ih).data(),
                    self.value(*w_hh).data(),
                    gy,
                    cache,
                    geom,
                );
                self.accumulate(grads, *x, gx);
                self.accumulate(grads, *w_ih, gih);
                self.accumulate(grads, *w_hh, ghh);
                self.accumulate(grads, *b, gb);
            }
            Op::SoftmaxCe {
                logits,
                targets,
                weights,
                probs,
            } => {
                let k = weights.len();
                let n = targets.len();
                let scale = gy[0] / T::lit(n as f64);
                let mut g = probs.clone();
                for (s, &y) in targets.iter().enumerate() {
                    let w = weights[y] * scale;
                    let row = &mut g[s * k..(s + 1) * k];
                    row[y] -= T::one();
                    for v in row.iter_mut() {
                        *v *= w;
                    }
                }
                self.accumulate(grads, *logits, g);
            }
        }
    }
}

pub(crate) const PROB_CLIP: f64 = 1e-7;

/// Weighted cross-entropy on probabilities: mean over rows of
/// `-w[y] * ln(clip(p[y]))`.
pub fn weighted_ce<T: Scalar>(
    probs: &[T],
    targets: &[usize],
    weights: &[T],
    k: usize,
) -> Result<T, TensorError> {
    if probs.len() != targets.len() * k || weights.len() != k {
        return Err(shape_err(
            "weighted_ce",
            format!("{} probs, {} targets, k={k}", probs.len(), targets.len()),
        ));
    }
    if targets.is_empty() {
        return Ok(T::zero());
    }
    let lo = T::lit(PROB_CLIP);
    let hi = T::one() - lo;
    let mut total = T::zero();
    for (s, &y) in targets.iter().enumerate() {
        if y >= k {
            return Err(TensorError::IndexOutOfRange {
                index: y,
                classes: k,
            });
        }
        let p = probs[s * k + y].max(lo).min(hi);
        total -= weights[y] * p.ln();
    }
    Ok(total / T::lit(targets.len() as f64))
}
