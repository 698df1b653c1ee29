use serde::{Deserialize, Serialize};

use super::{Rng, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// Normal with std `sqrt(2 / fan_in)`, for layers feeding a ReLU.
    He,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, for gated and sigmoid layers.
    Glorot,
    Zeros,
    Ones,
}

fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [] => (1, 1),
        [n] => (*n, *n),
        [out, inp] => (*inp, *out),
        [out, inp, rest @ ..] => {
            let field: usize = rest.iter().product();
            (inp * field, out * field)
        }
    }
}

pub fn init_params<T: Scalar>(shape: &[usize], scheme: InitScheme, rng: &mut Rng) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let (fan_in, fan_out) = fans(shape);
    let data = match scheme {
        InitScheme::Zeros => vec![T::zero(); n],
        InitScheme::Ones => vec![T::one(); n],
        InitScheme::He => {
            let std = (2.0 / fan_in.max(1) as f64).sqrt();
            (0..n).map(|_| T::lit(rng.normal() * std)).collect()
        }
        InitScheme::Glorot => {
            let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
            (0..n)
                .map(|_| T::lit(rng.uniform_range(-limit, limit)))
                .collect()
        }
    };
    Tensor::new(data, shape).expect("init shape")
}

/// Euclidean norm over all buffers jointly, accumulated in `f64`.
pub fn global_norm<T: Scalar>(grads: &[&[T]]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| {
            let x = v.as_f64();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescale every buffer by `c / max(c, norm)`. Returns the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(grads: &mut [&mut [T]], c: f64) -> f64 {
    let norm = global_norm(&grads.iter().map(|g| &g[..]).collect::<Vec<_>>());
    if norm > c {
        let scale = T::lit(c / norm);
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}
