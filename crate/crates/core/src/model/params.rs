use std::collections::BTreeMap;

use super::{ModelConfig, ModelError};
use crate::tensor::{init_params, BatchStats, BnState, InitScheme, Rng, Scalar, Tensor};

/// Shape and initializer of one trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitScheme,
}

fn spec(name: String, shape: &[usize], init: InitScheme) -> ParamSpec {
    ParamSpec {
        name,
        shape: shape.to_vec(),
        init,
    }
}

/// Trainable tensors in canonical order, derived from the config alone.
pub fn param_specs(config: &ModelConfig) -> Vec<ParamSpec> {
    use InitScheme::*;
    let mut out = Vec::new();
    let mut width = config.input_leads;
    for (i, block) in config.conv_blocks.iter().enumerate() {
        for (j, &c_out) in block.channels.iter().enumerate() {
            let p = format!("block{}.conv{}", i + 1, j + 1);
            out.push(spec(format!("{p}.weight"), &[c_out, width, block.kernel], He));
            out.push(spec(format!("{p}.bias"), &[c_out], Zeros));
            let p = format!("block{}.bn{}", i + 1, j + 1);
            out.push(spec(format!("{p}.gamma"), &[c_out], Ones));
            out.push(spec(format!("{p}.beta"), &[c_out], Zeros));
            width = c_out;
        }
    }
    if config.attention.enabled {
        let a = config.attention.out_channels;
        out.push(spec("attention.weight".into(), &[a, width, 1], Glorot));
        out.push(spec("attention.bias".into(), &[a], Zeros));
    }
    if config.bilstm.enabled {
        for (l, &d) in config.bilstm.hidden.iter().enumerate() {
            for dir in ["fwd", "bwd"] {
                let p = format!("bilstm{}.{dir}", l + 1);
                out.push(spec(format!("{p}.w_ih"), &[4 * d, width], Glorot));
                out.push(spec(format!("{p}.w_hh"), &[4 * d, d], Glorot));
                out.push(spec(format!("{p}.bias"), &[4 * d], Zeros));
            }
            width = 2 * d;
        }
    }
    let h = config.head.width;
    out.push(spec("head.dense1.weight".into(), &[h, width], He));
    out.push(spec("head.dense1.bias".into(), &[h], Zeros));
    out.push(spec(
        "head.dense2.weight".into(),
        &[config.num_classes, h],
        Glorot,
    ));
    out.push(spec("head.dense2.bias".into(), &[config.num_classes], Zeros));
    out
}

/// Names of the batch-norm layers and their channel counts.
pub fn bn_specs(config: &ModelConfig) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for (i, block) in config.conv_blocks.iter().enumerate() {
        for (j, &c) in block.channels.iter().enumerate() {
            out.push((format!("block{}.bn{}", i + 1, j + 1), c));
        }
    }
    out
}

/// Suffixes under which a batch-norm state is stored as plain tensors.
pub const BN_BUFFERS: [&str; 3] = ["running_mean", "running_var", "num_batches_tracked"];

/// Every tensor name a serialized model carries: trainables then buffers.
pub fn canonical_names(config: &ModelConfig) -> Vec<String> {
    let mut names: Vec<String> = param_specs(config).into_iter().map(|s| s.name).collect();
    for (bn, _) in bn_specs(config) {
        names.extend(BN_BUFFERS.iter().map(|b| format!("{bn}.{b}")));
    }
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    /// Trainable tensors, in canonical order.
    tensors: Vec<(String, Tensor<T>)>,
    bn: BTreeMap<String, BnState<T>>,
}

impl<T: Scalar> ModelParams<T> {
    /// Fresh parameters: He for ReLU-fed convs and dense layers, Glorot for
    /// the gates, zero biases, unit BN scale.
    pub fn build(config: &ModelConfig, rng: &mut Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let tensors = param_specs(config)
            .into_iter()
            .map(|s| {
                let t = init_params(&s.shape, s.init, rng);
                (s.name, t)
            })
            .collect();
        let bn = bn_specs(config)
            .into_iter()
            .map(|(name, c)| (name, BnState::new(c)))
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
            bn,
        })
    }

    /// Assemble from named tensors, checking names and shapes against the
    /// config. Batch-norm buffers are accepted under their
    /// `<layer>.running_mean` style names.
    pub fn from_named(
        config: &ModelConfig,
        mut named: BTreeMap<String, Tensor<T>>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let expected: std::collections::BTreeSet<String> =
            canonical_names(config).into_iter().collect();
        let got: std::collections::BTreeSet<String> = named.keys().cloned().collect();
        if expected != got {
            let missing: Vec<_> = expected.difference(&got).cloned().collect();
            let extra: Vec<_> = got.difference(&expected).cloned().collect();
            return Err(ModelError::NameSetMismatch { missing, extra });
        }
        let mut tensors = Vec::new();
        for s in param_specs(config) {
            let t = named.remove(&s.name).expect("checked above");
            if t.shape() != s.shape.as_slice() {
                return Err(ModelError::InvalidConfig(format!(
                    "{} has shape {:?}, expected {:?}",
                    s.name,
                    t.shape(),
                    s.shape
                )));
            }
            tensors.push((s.name, t));
        }
        let mut bn = BTreeMap::new();
        for (name, c) in bn_specs(config) {
            let mut take = |suffix: &str, len: usize| -> Result<Vec<T>, ModelError> {
                let key = format!("{name}.{suffix}");
                let t = named.remove(&key).expect("checked above");
                if t.len() != len {
                    return Err(ModelError::InvalidConfig(format!(
                        "{key} has {} elements, expected {len}",
                        t.len()
                    )));
                }
                Ok(t.into_data())
            };
            let running_mean = take("running_mean", c)?;
            let running_var = take("running_var", c)?;
            let tracked = take("num_batches_tracked", 1)?[0].as_f64();
            bn.insert(
                name,
                BnState {
                    running_mean,
                    running_var,
                    num_batches_tracked: tracked.max(0.0) as u64,
                },
            );
        }
        Ok(Self {
            config: config.clone(),
            tensors,
            bn,
        })
    }

    /// Every tensor, trainable and buffer, keyed by canonical name.
    pub fn to_named(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = self.tensors.clone();
        for (name, st) in &self.bn {
            let c = st.channels();
            out.push((
                format!("{name}.running_mean"),
                Tensor::new(st.running_mean.clone(), &[c]).expect("bn shape"),
            ));
            out.push((
                format!("{name}.running_var"),
                Tensor::new(st.running_var.clone(), &[c]).expect("bn shape"),
            ));
            out.push((
                format!("{name}.num_batches_tracked"),
                Tensor::new(vec![T::lit(st.num_batches_tracked as f64)], &[1]).expect("bn shape"),
            ));
        }
        out
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[(String, Tensor<T>)] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn bn_state(&self, name: &str) -> Option<&BnState<T>> {
        self.bn.get(name)
    }

    pub fn bn_states(&self) -> &BTreeMap<String, BnState<T>> {
        &self.bn
    }

    /// Fold one training batch's statistics into the running averages.
    pub fn apply_bn_stats(&mut self, stats: &[(String, BatchStats<T>)]) {
        for (name, s) in stats {
            if let Some(st) = self.bn.get_mut(name) {
                st.update(s);
            }
        }
    }

    /// Sum of trainable tensor sizes.
    pub fn num_trainable(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|(_, t)| t.all_finite())
            && self.bn.values().all(|s| {
                s.running_mean.iter().all(|v| v.is_finite())
                    && s.running_var.iter().all(|v| v.is_finite())
            })
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
            bn: self
                .bn
                .iter()
                .map(|(n, s)| {
                    (
                        n.clone(),
                        BnState {
                            running_mean: s.running_mean.iter().map(|v| U::lit(v.as_f64())).collect(),
                            running_var: s.running_var.iter().map(|v| U::lit(v.as_f64())).collect(),
                            num_batches_tracked: s.num_batches_tracked,
                        },
                    )
                })
                .collect(),
        }
    }
}
