use crate::io::EcgRecord;
use crate::tensor::{Rng, Stream};

/// Generator knobs besides class, rate, duration and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub leads: usize,
    /// Standard deviation of additive white noise, mV.
    pub noise_mv: f64,
    /// Amplitude of the sinusoidal baseline wander, mV.
    pub wander_mv: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            leads: 12,
            noise_mv: 0.02,
            wander_mv: 0.05,
        }
    }
}

/// Gaussian bump `(offset from R peak in s, amplitude mV, width s)`.
type Wave = (f64, f64, f64);

struct Beat {
    r_time: f64,
    waves: Vec<Wave>,
}

/// Morphology by class index in the default label order
/// (AF, IAVB, LBBB, PAC, PVC, RBBB, SNR, STD, STE). Indices past 8 reuse
/// the sinus template at a class-dependent rate.
fn template(class: usize, ectopic: bool) -> Vec<Wave> {
    let p = (-0.16, 0.15, 0.025);
    let narrow = [(-0.025, -0.1, 0.008), (0.0, 1.0, 0.010), (0.025, -0.25, 0.008)];
    let t = (0.30, 0.30, 0.050);
    let mut w: Vec<Wave> = Vec::new();
    match class {
        0 => {
            w.extend(narrow);
            w.push(t);
        }
        1 => {
            w.push((-0.32, 0.15, 0.025));
            w.extend(narrow);
            w.push(t);
        }
        2 => {
            w.push(p);
            w.extend([(-0.02, 0.6, 0.025), (0.035, 0.7, 0.030)]);
            w.push((0.32, -0.25, 0.060));
        }
        3 if ectopic => {
            w.push((-0.12, -0.1, 0.02));
            w.extend(narrow);
            w.push(t);
        }
        4 if ectopic => {
            w.extend([(0.0, 1.4, 0.040), (0.06, -0.4, 0.03)]);
            w.push((0.34, -0.4, 0.07));
        }
        5 => {
            w.push(p);
            w.extend(narrow);
            w.push((0.065, 0.5, 0.018));
            w.push((0.32, 0.25, 0.05));
        }
        7 | 8 => {
            let st = if class == 7 { -0.2 } else { 0.2 };
            w.push(p);
            w.extend(narrow);
            w.extend([(0.10, st, 0.035), (0.17, st, 0.035)]);
            w.push(t);
        }
        _ => {
            w.push(p);
            w.extend(narrow);
            w.push(t);
        }
    }
    w
}

fn beats(class: usize, duration: f64, rng: &mut Rng) -> Vec<Beat> {
    let extra = if class > 8 { 8.0 * (class - 8) as f64 } else { 0.0 };
    let hr = rng.uniform_range(60.0, 85.0) + extra;
    let rr = 60.0 / hr;
    let mut out = Vec::new();
    let mut t = rng.uniform_range(0.1, 0.1 + rr);
    let mut n = 0usize;
    let ectopic_every = 3 + rng.below(2);
    while t < duration + 0.5 {
        let ectopic = matches!(class, 3 | 4) && n % ectopic_every == ectopic_every - 1;
        out.push(Beat {
            r_time: t,
            waves: template(class, ectopic),
        });
        let next = if class == 0 {
            rr * (1.0 + 0.25 * rng.normal()).clamp(0.55, 1.6)
        } else if matches!(class, 3 | 4) && (n + 1) % ectopic_every == ectopic_every - 1 {
            rr * 0.65
        } else if matches!(class, 3 | 4) && n % ectopic_every == ectopic_every - 1 {
            // compensatory pause after the early beat
            rr * 1.35
        } else {
            rr * (1.0 + 0.02 * rng.normal())
        };
        t += next;
        n += 1;
    }
    out
}

/// Deterministic ECG-like test signal.
///
/// A sum-of-Gaussians P/QRS/T template repeats at a seeded heart rate with
/// class-specific changes: irregular RR and fibrillatory waves without P
/// for AF, long PR for IAVB, wide QRS for the bundle branch blocks, early
/// beats for PAC and PVC, and a shifted ST segment for STD and STE. Each
/// lead gets its own gain; baseline wander and white noise are added.
pub fn synth_ecg_with(
    class_id: usize,
    fs: u32,
    duration_s: f64,
    seed: u64,
    opts: &SynthOptions,
) -> EcgRecord {
    let mut rng = Rng::substream(seed, Stream::Synth, class_id as u64);
    let n = (duration_s * fs as f64).round() as usize;
    let beats = beats(class_id, duration_s, &mut rng);
    let mut base = vec![0.0f64; n];
    let dt = 1.0 / fs as f64;
    for b in &beats {
        for &(off, amp, width) in &b.waves {
            let centre = b.r_time + off;
            let lo = (((centre - 4.0 * width) / dt).floor().max(0.0)) as usize;
            let hi = ((((centre + 4.0 * width) / dt).ceil()) as usize).min(n);
            for (i, v) in base.iter_mut().enumerate().take(hi).skip(lo) {
                let z = (i as f64 * dt - centre) / width;
                *v += amp * (-0.5 * z * z).exp();
            }
        }
    }
    if class_id == 0 {
        let f = rng.uniform_range(5.0, 7.0);
        let ph = rng.uniform_range(0.0, std::f64::consts::TAU);
        for (i, v) in base.iter_mut().enumerate() {
            *v += 0.05 * (std::f64::consts::TAU * f * i as f64 * dt + ph).sin();
        }
    }
    let signal = (0..opts.leads)
        .map(|lead| {
            let sign = if lead == 3 { -1.0 } else { 1.0 };
            let gain = sign * rng.uniform_range(0.6, 1.4);
            let ph = rng.uniform_range(0.0, std::f64::consts::TAU);
            let wf = rng.uniform_range(0.1, 0.3);
            base.iter()
                .enumerate()
                .map(|(i, &v)| {
                    let t = i as f64 * dt;
                    let wander = opts.wander_mv * (std::f64::consts::TAU * wf * t + ph).sin();
                    (gain * v + wander + opts.noise_mv * rng.normal()) as f32
                })
                .collect()
        })
        .collect();
    EcgRecord {
        id: format!("synth_c{class_id}_s{seed}"),
        signal,
        fs,
        labels: vec![class_id],
        source_fs: fs,
    }
}

/// [`synth_ecg_with`] with 12 leads and default noise.
pub fn synth_ecg(class_id: usize, fs: u32, duration_s: f64, seed: u64) -> EcgRecord {
    synth_ecg_with(class_id, fs, duration_s, seed, &SynthOptions::default())
}

/// `per_class` records for each morphology in `morphologies`. Record
/// labels are positions in `morphologies`, so any subset forms a
/// contiguous label range. Ids are `s{label}_{i:04}`.
pub fn synth_corpus(
    morphologies: &[usize],
    per_class: usize,
    fs: u32,
    duration_s: f64,
    seed: u64,
    opts: &SynthOptions,
) -> Vec<EcgRecord> {
    let mut out = Vec::with_capacity(morphologies.len() * per_class);
    for (label, &m) in morphologies.iter().enumerate() {
        for i in 0..per_class {
            let s = seed.wrapping_mul(1_000_003).wrapping_add((label * 100_000 + i) as u64);
            let mut r = synth_ecg_with(m, fs, duration_s, s, opts);
            r.id = format!("s{label}_{i:04}");
            r.labels = vec![label];
            out.push(r);
        }
    }
    out
}
