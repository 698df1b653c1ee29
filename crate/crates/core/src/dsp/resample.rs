use super::DspError;

const DESIGN_ATTEN_DB: f64 = 65.0;

/// Zeroth-order modified Bessel function of the first kind (series form).
fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let (mut sum, mut term) = (1.0, 1.0);
    for k in 1..200 {
        term *= y / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Linear-phase Kaiser-window low-pass FIR.
///
/// `cutoff` and `transition` are fractions of the sampling rate. Length and
/// beta follow Kaiser's design formulas for `atten_db` of stopband
/// attenuation; the length is forced odd so the filter has an integer delay.
/// Taps are normalized to unit DC gain.
pub fn kaiser_lowpass(cutoff: f64, transition: f64, atten_db: f64) -> Vec<f64> {
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let dw = 2.0 * std::f64::consts::PI * transition;
    let mut n = ((atten_db - 7.95) / (2.285 * dw)).ceil() as usize + 1;
    if n % 2 == 0 {
        n += 1;
    }
    let m = (n - 1) as f64 / 2.0;
    let i0b = bessel_i0(beta);
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - m;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * t).sin() / (std::f64::consts::PI * t)
            };
            let r = t / m;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            sinc * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    for v in &mut h {
        *v /= dc;
    }
    h
}

/// Anti-alias and decimate one lead by `k`. The filter is applied centred
/// (zero delay) with zeros assumed outside the signal; output sample `j`
/// is the filtered value at input index `j * k`.
pub fn resample_lead(x: &[f64], k: usize, taps: &[f64]) -> Vec<f64> {
    if k == 1 {
        return x.to_vec();
    }
    let half = (taps.len() / 2) as isize;
    let n = x.len() as isize;
    (0..x.len().div_ceil(k))
        .map(|j| {
            let c = (j * k) as isize;
            let lo = (c - half).max(0);
            let hi = (c + half).min(n - 1);
            let mut acc = 0.0;
            for i in lo..=hi {
                acc += taps[(i - c + half) as usize] * x[i as usize];
            }
            acc
        })
        .collect()
}

/// Decimate every lead from `from_fs` to `to_fs`, which must divide it.
/// Anti-aliasing uses a Kaiser FIR with cutoff `0.45 * to_fs`, a transition
/// band of `0.1 * to_fs` and at least 60 dB stopband (designed for 65 dB,
/// since Kaiser's length formula undershoots slightly). A ratio of 1 is the
/// identity.
pub fn resample(leads: &[Vec<f64>], from_fs: u32, to_fs: u32) -> Result<Vec<Vec<f64>>, DspError> {
    if to_fs == 0 || from_fs == 0 || from_fs % to_fs != 0 {
        return Err(DspError::NonIntegerRatio {
            from: from_fs,
            to: to_fs,
        });
    }
    let k = (from_fs / to_fs) as usize;
    if k == 1 {
        return Ok(leads.to_vec());
    }
    let fs = from_fs as f64;
    let taps = kaiser_lowpass(0.45 * to_fs as f64 / fs, 0.1 * to_fs as f64 / fs, DESIGN_ATTEN_DB);
    Ok(leads.iter().map(|l| resample_lead(l, k, &taps)).collect())
}
