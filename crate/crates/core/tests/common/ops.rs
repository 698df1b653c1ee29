//! Finite-difference cases for every differentiable operator in f64.

use super::{grad_check, rand_away_from_zero, rand_tensor, GradReport};
use ecg_tinynet::tensor::{BnState, Mode, Padding, Rng, Stream, Tape, Tensor, Var};

pub const POINTWISE_TOL: f64 = 1e-6;
pub const BPTT_TOL: f64 = 1e-5;
const FLOOR: f64 = 1e-3;
pub const INSTANCES: u64 = 20;

fn dims(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// Worst error of one operator over all random instances.
pub struct OpResult {
    pub name: String,
    pub tol: f64,
    pub worst: f64,
}

impl OpResult {
    pub fn ok(&self) -> bool {
        self.worst < self.tol
    }
}

fn run(out: &mut Vec<OpResult>, name: &str, tol: f64, mut case: impl FnMut(u64) -> GradReport) {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let r = case(seed);
        assert!(r.checked > 0);
        worst = worst.max(r.max_rel);
    }
    out.push(OpResult {
        name: name.to_string(),
        tol,
        worst,
    });
}

pub fn conv1d_gradients(out: &mut Vec<OpResult>) {
    run(out, "conv1d", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (n, ci, co) = (dims(&mut rng, 1, 2), dims(&mut rng, 1, 3), dims(&mut rng, 1, 3));
        let k = dims(&mut rng, 1, 4);
        let t = dims(&mut rng, k.max(2), 9);
        let stride = dims(&mut rng, 1, 2);
        let pad = if seed % 2 == 0 { Padding::Same } else { Padding::Valid };
        let inputs = vec![
            rand_tensor(&[n, ci, t], -1.0, 1.0, &mut rng),
            rand_tensor(&[co, ci, k], -1.0, 1.0, &mut rng),
            rand_tensor(&[co], -1.0, 1.0, &mut rng),
        ];
        grad_check(&inputs, FLOOR, seed, |tape, v| {
            tape.conv1d(v[0], v[1], Some(v[2]), stride, pad).unwrap()
        })
    });
}

pub fn batchnorm_gradients_both_modes(out: &mut Vec<OpResult>) {
    run(out, "batchnorm1d(train)", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (n, c, t) = (dims(&mut rng, 1, 3), dims(&mut rng, 1, 3), dims(&mut rng, 2, 6));
        let inputs = vec![
            rand_tensor(&[n, c, t], -2.0, 2.0, &mut rng),
            rand_tensor(&[c], 0.5, 1.5, &mut rng),
            rand_tensor(&[c], -1.0, 1.0, &mut rng),
        ];
        let state = BnState::<f64>::new(c);
        grad_check(&inputs, FLOOR, seed, |tape, v| {
            tape.batchnorm1d(v[0], v[1], v[2], &state, Mode::Train).unwrap().0
        })
    });
    run(out, "batchnorm1d(eval)", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (n, c, t) = (dims(&mut rng, 1, 3), dims(&mut rng, 1, 3), dims(&mut rng, 1, 6));
        let inputs = vec![
            rand_tensor(&[n, c, t], -2.0, 2.0, &mut rng),
            rand_tensor(&[c], 0.5, 1.5, &mut rng),
            rand_tensor(&[c], -1.0, 1.0, &mut rng),
        ];
        let mut state = BnState::<f64>::new(c);
        state.running_mean = (0..c).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
        state.running_var = (0..c).map(|_| rng.uniform_range(0.5, 2.0)).collect();
        state.num_batches_tracked = 1;
        grad_check(&inputs, FLOOR, seed, |tape, v| {
            tape.batchnorm1d(v[0], v[1], v[2], &state, Mode::Eval).unwrap().0
        })
    });
}

pub fn pointwise_activation_gradients(out: &mut Vec<OpResult>) {
    run(out, "relu", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let inputs = vec![rand_away_from_zero(&[2, dims(&mut rng, 1, 4), 5], 1e-2, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.relu(v[0]))
    });
    run(out, "sigmoid", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let inputs = vec![rand_tensor(&[2, 3, dims(&mut rng, 1, 6)], -4.0, 4.0, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.sigmoid(v[0]))
    });
    run(out, "softmax", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let inputs = vec![rand_tensor(&[dims(&mut rng, 1, 4), dims(&mut rng, 2, 9)], -3.0, 3.0, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.softmax(v[0]).unwrap())
    });
}

pub fn softmax_cross_entropy_gradients(out: &mut Vec<OpResult>) {
    run(out, "softmax+weighted CE", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (n, k) = (dims(&mut rng, 1, 5), dims(&mut rng, 2, 9));
        let targets: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.2, 3.0)).collect();
        let inputs = vec![rand_tensor(&[n, k], -3.0, 3.0, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| {
            tape.softmax_cross_entropy(v[0], &targets, &weights).unwrap()
        })
    });
}

pub fn pooling_dropout_mul_gap_gradients(out: &mut Vec<OpResult>) {
    run(out, "maxpool1d", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let pool = dims(&mut rng, 1, 3);
        let t = dims(&mut rng, pool, 10);
        let inputs = vec![rand_tensor(&[2, 2, t], -1.0, 1.0, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.maxpool1d(v[0], pool, pool).unwrap())
    });
    run(out, "dropout(eval)", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let inputs = vec![rand_tensor(&[2, 3, dims(&mut rng, 1, 6)], -1.0, 1.0, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| {
            let mut r = Rng::new(seed, Stream::Dropout);
            tape.dropout(v[0], 0.4, Mode::Eval, &mut r)
        })
    });
    run(out, "dropout(train, fixed mask)", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let inputs = vec![rand_tensor(&[2, 3, dims(&mut rng, 1, 6)], -1.0, 1.0, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| {
            let mut r = Rng::new(seed, Stream::Dropout);
            tape.dropout(v[0], 0.4, Mode::Train, &mut r)
        })
    });
    run(out, "mul", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (n, c, t) = (dims(&mut rng, 1, 2), dims(&mut rng, 1, 3), dims(&mut rng, 1, 5));
        let inputs = vec![
            rand_tensor(&[n, c, t], -1.0, 1.0, &mut rng),
            rand_tensor(&[n, c, t], -1.0, 1.0, &mut rng),
        ];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.mul(v[0], v[1]).unwrap())
    });
    run(out, "mul(broadcast)", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (n, c, t) = (dims(&mut rng, 1, 2), dims(&mut rng, 2, 4), dims(&mut rng, 1, 5));
        let inputs = vec![
            rand_tensor(&[n, c, t], -1.0, 1.0, &mut rng),
            rand_tensor(&[n, 1, t], -1.0, 1.0, &mut rng),
        ];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.mul(v[0], v[1]).unwrap())
    });
    run(out, "gap", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let inputs = vec![rand_tensor(&[2, dims(&mut rng, 1, 4), dims(&mut rng, 1, 7)], -1.0, 1.0, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.gap(v[0]).unwrap())
    });
}

pub fn dense_gradients(out: &mut Vec<OpResult>) {
    run(out, "dense", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (n, i, o) = (dims(&mut rng, 1, 3), dims(&mut rng, 1, 5), dims(&mut rng, 1, 4));
        let inputs = vec![
            rand_tensor(&[n, i], -1.0, 1.0, &mut rng),
            rand_tensor(&[o, i], -1.0, 1.0, &mut rng),
            rand_tensor(&[o], -1.0, 1.0, &mut rng),
        ];
        grad_check(&inputs, FLOOR, seed, |tape, v| tape.dense(v[0], v[1], v[2]).unwrap())
    });
}

fn lstm_inputs(rng: &mut Rng, n: usize, f: usize, d: usize, t: usize) -> Vec<Tensor<f64>> {
    vec![
        rand_tensor(&[n, f, t], -1.0, 1.0, rng),
        rand_tensor(&[4 * d, f], -0.8, 0.8, rng),
        rand_tensor(&[4 * d, d], -0.8, 0.8, rng),
        rand_tensor(&[4 * d], -0.5, 0.5, rng),
    ]
}

pub fn lstm_gradients_both_directions(out: &mut Vec<OpResult>) {
    for reverse in [false, true] {
        run(out, if reverse { "lstm(reverse)" } else { "lstm(forward)" }, BPTT_TOL, |seed| {
            let mut rng = Rng::new(seed, Stream::Init);
            let (n, f) = (dims(&mut rng, 1, 2), dims(&mut rng, 1, 3));
            let (d, t) = (dims(&mut rng, 1, 4), dims(&mut rng, 1, 8));
            let inputs = lstm_inputs(&mut rng, n, f, d, t);
            grad_check(&inputs, FLOOR, seed, |tape, v| {
                tape.lstm(v[0], v[1], v[2], v[3], reverse).unwrap()
            })
        });
    }
}

pub fn bilstm_gradients(out: &mut Vec<OpResult>) {
    run(out, "bilstm", BPTT_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let (f, d, t) = (dims(&mut rng, 1, 3), dims(&mut rng, 1, 4), dims(&mut rng, 1, 8));
        let mut inputs = lstm_inputs(&mut rng, 1, f, d, t);
        inputs.extend(lstm_inputs(&mut rng, 1, f, d, t).into_iter().skip(1));
        grad_check(&inputs, FLOOR, seed, |tape, v| {
            tape.bilstm(v[0], (v[1], v[2], v[3]), (v[4], v[5], v[6])).unwrap()
        })
    });
}

pub fn fan_out_accumulates(out: &mut Vec<OpResult>) {
    // y = sigmoid(x) + relu(x) * x: three uses of x
    run(out, "fan-out", POINTWISE_TOL, |seed| {
        let mut rng = Rng::new(seed, Stream::Init);
        let inputs = vec![rand_away_from_zero(&[1, 2, 4], 1e-2, &mut rng)];
        grad_check(&inputs, FLOOR, seed, |tape: &mut Tape<f64>, v: &[Var]| {
            let a = tape.sigmoid(v[0]);
            let r = tape.relu(v[0]);
            let b = tape.mul(r, v[0]).unwrap();
            tape.add(a, b).unwrap()
        })
    });
}

/// Every operator group, in a fixed order.
pub fn all() -> Vec<OpResult> {
    let mut out = Vec::new();
    conv1d_gradients(&mut out);
    batchnorm_gradients_both_modes(&mut out);
    pointwise_activation_gradients(&mut out);
    softmax_cross_entropy_gradients(&mut out);
    pooling_dropout_mul_gap_gradients(&mut out);
    dense_gradients(&mut out);
    lstm_gradients_both_directions(&mut out);
    bilstm_gradients(&mut out);
    fan_out_accumulates(&mut out);
    out
}
