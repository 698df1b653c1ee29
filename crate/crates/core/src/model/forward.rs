use std::collections::HashMap;

use super::{ModelError, ModelParams};
use crate::tensor::{
    shape_err, BatchStats, Mode, Padding, Rng, Scalar, Stream, Tape, Tensor, Var,
};

/// Parameters registered on a tape, by canonical name.
pub struct BoundParams {
    vars: HashMap<String, Var>,
    order: Vec<(String, Var)>,
}

impl BoundParams {
    /// Register every trainable tensor. With `trainable = false` they are
    /// recorded as constants and receive no gradients.
    pub fn bind<T: Scalar>(params: &ModelParams<T>, tape: &mut Tape<T>, trainable: bool) -> Self {
        let mut vars = HashMap::new();
        let mut order = Vec::new();
        for (name, t) in params.tensors() {
            let v = if trainable {
                tape.leaf(t.clone())
            } else {
                tape.constant(t.clone())
            };
            vars.insert(name.clone(), v);
            order.push((name.clone(), v));
        }
        Self { vars, order }
    }

    /// Use vars the caller already placed on the tape, e.g. to differentiate
    /// with respect to chosen parameters.
    pub fn from_vars(pairs: Vec<(String, Var)>) -> Self {
        Self {
            vars: pairs.iter().cloned().collect(),
            order: pairs,
        }
    }

    pub fn var(&self, name: &str) -> Result<Var, ModelError> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    /// `(name, var)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.order.iter().map(|(n, v)| (n.as_str(), *v))
    }
}

pub struct ForwardOutput<T> {
    pub logits: Var,
    /// Class probabilities `[n, k]`.
    pub probs: Var,
    /// Sigmoid gate `[n, c', t/8]` (or `[n, 1, t/8]`), when attention is on.
    pub attention: Option<Var>,
    /// Sequence entering global average pooling.
    pub features: Var,
    /// Output of global average pooling.
    pub pooled: Var,
    /// Training-mode batch-norm statistics, to be folded into the running
    /// averages by the caller.
    pub bn_stats: Vec<(String, BatchStats<T>)>,
}

/// Run the network on `x: [n, leads, t]`.
///
/// Conv blocks apply conv, BN, ReLU twice, then max pooling and dropout.
/// The optional attention gate multiplies the conv features by a sigmoid
/// 1x1 conv of themselves; the optional BiLSTM stack follows; global average
/// pooling, a ReLU dense layer with dropout, and the softmax classifier
/// close the network. Dropout draws from `rng` in training mode only.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    bound: &BoundParams,
    tape: &mut Tape<T>,
    x: Var,
    mode: Mode,
    rng: &mut Rng,
) -> Result<ForwardOutput<T>, ModelError> {
    let cfg = params.config();
    let s = tape.shape(x).to_vec();
    if s.len() != 3 || s[1] != cfg.input_leads {
        return Err(ModelError::LeadMismatch {
            expected: cfg.input_leads,
            got: if s.len() == 3 { s[1] } else { 0 },
        });
    }
    let factor = cfg.pool_factor();
    if s[2] < factor || s[2] % factor != 0 {
        return Err(shape_err(
            "forward",
            format!("signal length {} must be a positive multiple of {factor}", s[2]),
        )
        .into());
    }

    let mut bn_stats = Vec::new();
    let mut h = x;
    for (i, block) in cfg.conv_blocks.iter().enumerate() {
        for j in 0..2 {
            let conv = format!("block{}.conv{}", i + 1, j + 1);
            let bn = format!("block{}.bn{}", i + 1, j + 1);
            h = tape.conv1d(
                h,
                bound.var(&format!("{conv}.weight"))?,
                Some(bound.var(&format!("{conv}.bias"))?),
                1,
                Padding::Same,
            )?;
            let state = params
                .bn_state(&bn)
                .ok_or_else(|| ModelError::MissingParam(bn.clone()))?;
            let (y, stats) = tape.batchnorm1d(
                h,
                bound.var(&format!("{bn}.gamma"))?,
                bound.var(&format!("{bn}.beta"))?,
                state,
                mode,
            )?;
            if let Some(stats) = stats {
                bn_stats.push((bn, stats));
            }
            h = tape.relu(y);
        }
        h = tape.maxpool1d(h, block.pool, block.pool)?;
        h = tape.dropout(h, block.dropout, mode, rng);
    }

    let mut attention = None;
    if cfg.attention.enabled {
        let pre = tape.conv1d(
            h,
            bound.var("attention.weight")?,
            Some(bound.var("attention.bias")?),
            1,
            Padding::Same,
        )?;
        let gate = tape.sigmoid(pre);
        h = tape.mul(h, gate)?;
        attention = Some(gate);
    }

    if cfg.bilstm.enabled {
        for l in 1..=cfg.bilstm.hidden.len() {
            let dir = |d: &str| -> Result<(Var, Var, Var), ModelError> {
                let p = format!("bilstm{l}.{d}");
                Ok((
                    bound.var(&format!("{p}.w_ih"))?,
                    bound.var(&format!("{p}.w_hh"))?,
                    bound.var(&format!("{p}.bias"))?,
                ))
            };
            h = tape.bilstm(h, dir("fwd")?, dir("bwd")?)?;
        }
    }

    let features = h;
    let pooled = tape.gap(features)?;
    let z = tape.dense(
        pooled,
        bound.var("head.dense1.weight")?,
        bound.var("head.dense1.bias")?,
    )?;
    let z = tape.relu(z);
    let z = tape.dropout(z, cfg.head.dropout, mode, rng);
    let logits = tape.dense(
        z,
        bound.var("head.dense2.weight")?,
        bound.var("head.dense2.bias")?,
    )?;
    let probs = tape.softmax(logits)?;
    Ok(ForwardOutput {
        logits,
        probs,
        attention,
        features,
        pooled,
        bn_stats,
    })
}

/// Eval-mode class probabilities for a batch `[n, leads, t]`.
pub fn predict<T: Scalar>(params: &ModelParams<T>, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(params, &mut tape, false);
    let xv = tape.constant(x.clone());
    // eval mode never draws from the stream
    let mut rng = Rng::new(0, Stream::Dropout);
    let out = forward(params, &bound, &mut tape, xv, Mode::Eval, &mut rng)?;
    Ok(tape.value(out.probs).clone())
}
