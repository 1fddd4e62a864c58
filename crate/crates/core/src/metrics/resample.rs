use std::f64::consts::PI;

use crate::dsp::Waveform;
use crate::{Error, Result};

/// Zero crossings of the sinc kernel on each side, at the lower of the two
/// rates.
const HALF_ZEROS: f64 = 16.0;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(u: f64) -> f64 {
    // u in [-1, 1]
    0.42 + 0.5 * (PI * u).cos() + 0.08 * (2.0 * PI * u).cos()
}

/// Band-limited resampling with a Blackman-windowed sinc whose cutoff is the
/// lower Nyquist frequency. Output length is `round(len · target / source)`.
pub fn resample(w: &Waveform, target_sr: u32) -> Result<Waveform> {
    if target_sr == 0 {
        return Err(Error::InvalidConfig("target sample rate must be positive".into()));
    }
    if target_sr == w.sample_rate {
        return Ok(w.clone());
    }
    let ratio = f64::from(target_sr) / f64::from(w.sample_rate);
    let cutoff = ratio.min(1.0);
    let half = HALF_ZEROS / cutoff;
    let out_len = (w.len() as f64 * ratio).round() as usize;
    let n = w.len() as isize;
    let samples = (0..out_len)
        .map(|j| {
            let x = j as f64 / ratio;
            let lo = ((x - half).ceil() as isize).max(0);
            let hi = ((x + half).floor() as isize).min(n - 1);
            (lo..=hi)
                .map(|i| {
                    let u = x - i as f64;
                    w.samples[i as usize] * cutoff * sinc(cutoff * u) * blackman(u / half)
                })
                .sum()
        })
        .collect();
    Waveform::new(samples, target_sr)
}
