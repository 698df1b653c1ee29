use std::f64::consts::TAU;

use ecg_tinynet::dsp::{
    fix_length, highpass, normalize_lead, preprocess, resample, synth_corpus, synth_ecg, DspError,
    LeadSelection, Normalize, PreprocessConfig, SynthOptions,
};
use ecg_tinynet::tensor::{Rng, Stream};
use proptest::prelude::*;

fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (TAU * freq * i as f64 / fs).sin()).collect()
}

/// Peak amplitude of the middle half of `x`.
fn mid_amplitude(x: &[f64]) -> f64 {
    let q = x.len() / 4;
    x[q..x.len() - q].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn resample_keeps_five_hz_amplitude() {
    let x = sine(5.0, 500.0, 5000);
    let y = resample(&[x], 500, 250).unwrap().remove(0);
    assert_eq!(y.len(), 2500);
    let amp = mid_amplitude(&y);
    assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}");
    // and the phase: sample i of the output sits at time i / 250
    let expected = sine(5.0, 250.0, 2500);
    let err = y[500..2000]
        .iter()
        .zip(&expected[500..2000])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 0.01, "max deviation {err}");
}

#[test]
fn resample_lengths_and_identity() {
    let x: Vec<f64> = (0..15000).map(|i| (i as f64 * 0.37).cos()).collect();
    assert_eq!(resample(&[x.clone()], 500, 250).unwrap()[0].len(), 7500);
    assert_eq!(resample(&[x[..14999].to_vec()], 500, 250).unwrap()[0].len(), 7500);
    let same = resample(&[x.clone()], 250, 250).unwrap();
    assert!(same[0].iter().zip(&x).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(matches!(
        resample(&[x], 500, 300),
        Err(DspError::NonIntegerRatio { .. })
    ));
}

#[test]
fn resample_rejects_aliasing_tone() {
    // 200 Hz at 500 Hz would alias to 50 Hz at 250 Hz; it must be >= 60 dB down
    let y = resample(&[sine(200.0, 500.0, 10000)], 500, 250).unwrap().remove(0);
    let amp = mid_amplitude(&y);
    assert!(20.0 * amp.log10() < -60.0, "leak {amp}");
}

#[test]
fn highpass_removes_dc() {
    let c = 3.7;
    let y = highpass(&vec![c; 5000], 250.0, 0.5, 2).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    assert!(mean.abs() < 1e-3 * c, "mean {mean}");
    let residual = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(20.0 * (residual / c).log10() <= -40.0, "residual {residual}");
    assert!(highpass(&[0.0; 300], 250.0, 0.5, 2).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn highpass_passes_one_hz() {
    let y = highpass(&sine(1.0, 250.0, 5000), 250.0, 0.5, 2).unwrap();
    let amp = mid_amplitude(&y);
    assert!((amp - 1.0).abs() < 0.1, "amplitude {amp}");
}

#[test]
fn highpass_rejects_bad_cutoff() {
    for cutoff in [0.0, -1.0, 125.0, 300.0] {
        assert!(matches!(
            highpass(&[1.0; 10], 250.0, cutoff, 2),
            Err(DspError::InvalidCutoff { .. })
        ));
    }
}

#[test]
fn fix_length_sixty_seconds() {
    let long: Vec<f32> = (0..20000).map(|i| i as f32).collect();
    let y = fix_length(&long, 60 * 250);
    assert_eq!(y.len(), 15000);
    assert_eq!(y, long[..15000]);
    let short = fix_length(&long[..100], 15000);
    assert_eq!(short[..100], long[..100]);
    assert!(short[100..].iter().all(|&v| v == 0.0));
}

#[test]
fn normalize_examples() {
    let mut x = vec![1.0, 2.0, 3.0];
    normalize_lead(&mut x, 3);
    let mean = x.iter().sum::<f64>() / 3.0;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
    assert!(mean.abs() < 1e-12 && (var.sqrt() - 1.0).abs() < 1e-12);

    let mut c = vec![4.2; 10];
    normalize_lead(&mut c, 10);
    assert!(c.iter().all(|&v| v == 0.0));
}

fn random_leads(rng: &mut Rng, leads: usize, n: usize) -> Vec<Vec<f64>> {
    (0..leads)
        .map(|_| (0..n).map(|_| rng.uniform_range(-3.0, 3.0)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalize_moments(seed in any::<u64>(), n in 2usize..2000, pad in 0usize..500) {
        let mut rng = Rng::new(seed, Stream::Synth);
        let mut x: Vec<f64> = (0..n).map(|_| rng.uniform_range(-5.0, 9.0) * 3.0).collect();
        x.resize(n + pad, 0.0);
        normalize_lead(&mut x, n);
        let mean = x[..n].iter().sum::<f64>() / n as f64;
        let var = x[..n].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
        prop_assert!(x[n..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fix_length_idempotent(n in 0usize..400, target in 1usize..400) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let once = fix_length(&x, target);
        prop_assert_eq!(fix_length(&once, target), once.clone());
        prop_assert_eq!(once.len(), target);
    }

    #[test]
    fn resample_commutes_with_truncation(seed in any::<u64>(), len in 600usize..1200, target in 100usize..290) {
        let mut rng = Rng::new(seed, Stream::Synth);
        let x = random_leads(&mut rng, 1, len).remove(0);
        // inputs longer than both targets; the first `target` outputs only see
        // samples before 2 * target + taps / 2
        let a = fix_length(&resample(&[x.clone()], 500, 250).unwrap()[0], target);
        let taps = 2 * target + 200;
        let b = resample(&[fix_length(&x, taps)], 500, 250).unwrap();
        let b = fix_length(&b[0], target);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn highpass_is_linear(seed in any::<u64>(), n in 20usize..1500, a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let mut rng = Rng::new(seed, Stream::Synth);
        let xs = random_leads(&mut rng, 2, n);
        let mix: Vec<f64> = xs[0].iter().zip(&xs[1]).map(|(x, y)| a * x + b * y).collect();
        let lhs = highpass(&mix, 250.0, 0.5, 2).unwrap();
        let hx = highpass(&xs[0], 250.0, 0.5, 2).unwrap();
        let hy = highpass(&xs[1], 250.0, 0.5, 2).unwrap();
        let scale = lhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let rhs = a * hx[i] + b * hy[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * scale, "{} vs {}", lhs[i], rhs);
        }
    }

    #[test]
    fn pipeline_shape_and_finiteness(seed in any::<u64>(), leads in 1usize..4, n in 8usize..3000, single in any::<bool>(), fs in prop::sample::select(vec![250u32, 500])) {
        let mut rng = Rng::new(seed, Stream::Synth);
        let x: Vec<Vec<f32>> = random_leads(&mut rng, leads, n)
            .into_iter()
            .map(|l| l.into_iter().map(|v| (v * 1e3) as f32).collect())
            .collect();
        let cfg = PreprocessConfig {
            target_len: 1000,
            lead_selection: if single { LeadSelection::single() } else { LeadSelection::All },
            ..PreprocessConfig::default()
        };
        let y = preprocess(&x, fs, &cfg).unwrap();
        prop_assert_eq!(y.len(), if single { 1 } else { leads });
        for l in &y {
            prop_assert_eq!(l.len(), 1000);
            prop_assert!(l.iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn pipeline_pads_with_exact_zeros() {
    let rec = synth_ecg(6, 500, 10.0, 4);
    let y = preprocess(&rec.signal, 500, &PreprocessConfig::default()).unwrap();
    assert_eq!((y.len(), y[0].len()), (12, 15000));
    for l in &y {
        assert!(l[2500..].iter().all(|&v| v == 0.0));
        let m = l[..2500].iter().map(|&v| v as f64).sum::<f64>() / 2500.0;
        assert!(m.abs() < 1e-5);
    }
    let raw = PreprocessConfig {
        normalize: Normalize::None,
        lead_selection: LeadSelection::Indices(vec![12]),
        ..PreprocessConfig::default()
    };
    assert!(matches!(
        preprocess(&rec.signal, 500, &raw),
        Err(DspError::LeadOutOfRange { .. })
    ));
}

/// R-peak times from lead II: local maxima above half the global maximum,
/// at least 0.3 s apart. Returns `(mean RR in s, mean QRS width at half
/// height in s)`.
fn rr_and_qrs(x: &[f32], fs: f64) -> (f64, f64) {
    let top = x.iter().fold(0.0f32, |m, &v| m.max(v));
    let min_gap = (0.3 * fs) as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..x.len() - 1 {
        if x[i] > 0.5 * top && x[i] >= x[i - 1] && x[i] > x[i + 1] {
            match peaks.last() {
                Some(&p) if i - p < min_gap => {
                    if x[i] > x[p] {
                        *peaks.last_mut().unwrap() = i;
                    }
                }
                _ => peaks.push(i),
            }
        }
    }
    let rr = peaks.windows(2).map(|w| (w[1] - w[0]) as f64).sum::<f64>() / (peaks.len() - 1) as f64 / fs;
    let width = peaks
        .iter()
        .map(|&p| {
            let half = 0.5 * x[p];
            let mut lo = p;
            while lo > 0 && x[lo - 1] > half {
                lo -= 1;
            }
            let mut hi = p;
            while hi + 1 < x.len() && x[hi + 1] > half {
                hi += 1;
            }
            (hi - lo + 1) as f64
        })
        .sum::<f64>()
        / peaks.len() as f64
        / fs;
    (rr, width)
}

#[test]
fn synthetic_classes_are_linearly_separable() {
    // SNR vs LBBB, 200 each
    let recs = synth_corpus(&[6, 2], 200, 250, 10.0, 21, &SynthOptions::default());
    let feats: Vec<([f64; 2], usize)> = recs
        .iter()
        .map(|r| {
            let (rr, qrs) = rr_and_qrs(&r.signal[1], 250.0);
            ([rr, qrs], r.labels[0])
        })
        .collect();
    // Fisher discriminant fitted on even records, scored on odd ones
    let (train, test): (Vec<_>, Vec<_>) = feats.iter().enumerate().partition(|(i, _)| i % 2 == 0);
    let stats = |c: usize| {
        let pts: Vec<[f64; 2]> = train.iter().filter(|(_, f)| f.1 == c).map(|(_, f)| f.0).collect();
        let n = pts.len() as f64;
        let m = [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n];
        let mut s = [[0.0; 2]; 2];
        for p in &pts {
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] += (p[i] - m[i]) * (p[j] - m[j]);
                }
            }
        }
        (m, s)
    };
    let ((m0, s0), (m1, s1)) = (stats(0), stats(1));
    let sw = [[s0[0][0] + s1[0][0], s0[0][1] + s1[0][1]], [s0[1][0] + s1[1][0], s0[1][1] + s1[1][1]]];
    let det = sw[0][0] * sw[1][1] - sw[0][1] * sw[1][0];
    let d = [m1[0] - m0[0], m1[1] - m0[1]];
    let w = [(sw[1][1] * d[0] - sw[0][1] * d[1]) / det, (-sw[1][0] * d[0] + sw[0][0] * d[1]) / det];
    let proj = |p: &[f64; 2]| w[0] * p[0] + w[1] * p[1];
    let threshold = 0.5 * (proj(&m0) + proj(&m1));
    let hits = test
        .iter()
        .filter(|(_, f)| usize::from(proj(&f.0) > threshold) == f.1)
        .count();
    let acc = hits as f64 / test.len() as f64;
    assert!(acc >= 0.9, "accuracy {acc}");
}

#[test]
fn synth_is_deterministic_and_sized() {
    let a = synth_ecg(4, 250, 4.0, 9);
    assert_eq!(a.samples(), 1000);
    assert_eq!(a, synth_ecg(4, 250, 4.0, 9));
    for class in 0..9 {
        assert!(synth_ecg(class, 500, 2.0, 1).signal.iter().flatten().all(|v| v.is_finite()));
    }
}
