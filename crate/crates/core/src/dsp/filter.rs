use num_complex::Complex64;

use super::DspError;

/// One biquad `[b0, b1, b2, a0, a1, a2]` with `a0 = 1`.
pub type Sos = [f64; 6];

/// Digital Butterworth high-pass as second-order sections.
///
/// Analog prototype poles are mapped through the low-to-high-pass
/// substitution and a prewarped bilinear transform; all zeros land on
/// `z = 1`. Each section is scaled to unit gain at Nyquist.
pub fn butter_highpass(order: usize, cutoff: f64, fs: f64) -> Result<Vec<Sos>, DspError> {
    let nyquist = fs / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) || order == 0 {
        return Err(DspError::InvalidCutoff { cutoff, nyquist });
    }
    let k = 2.0 * fs;
    let wc = k * (std::f64::consts::PI * cutoff / fs).tan();
    let n = order as f64;
    let digital = |p: Complex64| {
        let s = wc / p;
        (k + s) / (k - s)
    };
    let mut sos = Vec::new();
    // upper-half-plane prototype poles pair with their conjugates
    for i in 0..order / 2 {
        let theta = std::f64::consts::PI * (2.0 * i as f64 + n + 1.0) / (2.0 * n);
        let z = digital(Complex64::from_polar(1.0, theta));
        let (a1, a2) = (-2.0 * z.re, z.norm_sqr());
        let g = (1.0 - a1 + a2) / 4.0;
        sos.push([g, -2.0 * g, g, 1.0, a1, a2]);
    }
    if order % 2 == 1 {
        let z = digital(Complex64::new(-1.0, 0.0)).re;
        let g = (1.0 + z) / 2.0;
        sos.push([g, -g, 0.0, 1.0, -z, 0.0]);
    }
    Ok(sos)
}

/// Cascade filter, transposed direct form II, with per-section state.
pub fn sosfilt(sos: &[Sos], x: &[f64], zi: &mut [[f64; 2]]) -> Vec<f64> {
    let mut y = x.to_vec();
    for (s, z) in sos.iter().zip(zi.iter_mut()) {
        for v in y.iter_mut() {
            let inp = *v;
            let out = s[0] * inp + z[0];
            z[0] = s[1] * inp - s[4] * out + z[1];
            z[1] = s[2] * inp - s[5] * out;
            *v = out;
        }
    }
    y
}

/// Section states that hold the cascade at rest for a unit step input.
fn step_state(sos: &[Sos]) -> Vec<[f64; 2]> {
    let mut u = 1.0;
    sos.iter()
        .map(|s| {
            let gain = (s[0] + s[1] + s[2]) / (1.0 + s[4] + s[5]);
            let y = gain * u;
            let z = [y - s[0] * u, s[2] * u - s[5] * y];
            u = y;
            z
        })
        .collect()
}

/// Zero-phase forward-backward filtering. The signal is extended at both
/// ends by odd reflection and each pass starts from the steady state for
/// its first sample.
pub fn filtfilt(sos: &[Sos], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = (3 * (2 * sos.len() + 1)).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = step_state(sos);
    let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
    let mut z = scaled(ext[0]);
    let mut y = sosfilt(sos, &ext, &mut z);
    y.reverse();
    let mut z = scaled(y[0]);
    let mut y = sosfilt(sos, &y, &mut z);
    y.reverse();
    y[pad..pad + n].to_vec()
}

/// Zero-phase Butterworth high-pass of one lead.
pub fn highpass(x: &[f64], fs: f64, cutoff: f64, order: usize) -> Result<Vec<f64>, DspError> {
    let sos = butter_highpass(order, cutoff, fs)?;
    Ok(filtfilt(&sos, x))
}
