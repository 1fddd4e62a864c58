use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;

use super::stft::{istft_samples, stft_samples};
use super::{ComplexSpectrogram, StftConfig};
use crate::rng::rng_from;
use crate::{Error, Matrix, Result};

#[derive(Clone, Debug)]
pub struct GriffinLimOutput {
    /// Peak-normalized reconstruction of length `(T-1)·hop + frame_length`.
    pub samples: Vec<f64>,
    /// Consistency error of the initial estimate followed by one entry per
    /// iteration.
    pub consistency: Vec<f64>,
}

fn bin_weight(k: usize, fft_size: usize) -> f64 {
    if k == 0 || (fft_size.is_multiple_of(2) && k == fft_size / 2) {
        1.0
    } else {
        2.0
    }
}

/// `‖|X| − mag‖₂ / ‖mag‖₂` over the full (two-sided) spectrum.
pub fn consistency_error(spec: &ComplexSpectrogram, mag: &Matrix) -> f64 {
    let n = spec.config.fft_size;
    let (mut num, mut den) = (0.0, 0.0);
    for t in 0..spec.n_frames {
        for (k, (c, m)) in spec.frame(t).iter().zip(mag.row(t)).enumerate() {
            let w = bin_weight(k, n);
            num += w * (c.norm() - m).powi(2);
            den += w * m * m;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Momentum of [`griffin_lim`].
pub const GRIFFIN_LIM_MOMENTUM: f64 = 0.99;

/// Griffin-Lim phase reconstruction from a seeded random-phase start, with
/// safeguarded momentum. See [`griffin_lim_with_momentum`].
pub fn griffin_lim(mag: &Matrix, cfg: &StftConfig, iters: usize, seed: u64) -> Result<GriffinLimOutput> {
    griffin_lim_with_momentum(mag, cfg, iters, seed, GRIFFIN_LIM_MOMENTUM)
}

/// Alternating projections between the consistent spectrograms and the
/// spectrograms with magnitude `mag`.
///
/// With `momentum = 0` this is the classic iteration
/// `x ← istft(mag ⊙ phase(stft(x)))`. Otherwise the next projection starts
/// from the extrapolated point `c_n + momentum·(c_n − c_{n−1})` (fast
/// Griffin-Lim), and any step that would raise the consistency error is
/// redone as a plain step from `c_n`. Plain steps never raise the error, so
/// the error sequence is non-increasing either way.
pub fn griffin_lim_with_momentum(
    mag: &Matrix,
    cfg: &StftConfig,
    iters: usize,
    seed: u64,
    momentum: f64,
) -> Result<GriffinLimOutput> {
    cfg.validate()?;
    if mag.cols() != cfg.n_bins() {
        return Err(Error::DimensionMismatch(format!(
            "magnitude has {} bins, config expects {}",
            mag.cols(),
            cfg.n_bins()
        )));
    }
    if mag.as_slice().iter().any(|&m| m < 0.0 || !m.is_finite()) {
        return Err(Error::InvalidConfig("magnitudes must be finite and nonnegative".into()));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::InvalidConfig(format!("momentum must be in [0, 1), got {momentum}")));
    }
    let n_frames = mag.rows();
    let len = cfg.signal_length(n_frames);
    if mag.as_slice().iter().all(|&m| m == 0.0) {
        return Ok(GriffinLimOutput {
            samples: vec![0.0; len],
            consistency: vec![0.0; iters + 1],
        });
    }

    let mut rng = rng_from(seed, &[0x6c]);
    let mut spec = ComplexSpectrogram::zeros(n_frames, *cfg);
    for (c, &m) in spec.data.iter_mut().zip(mag.as_slice()) {
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        *c = Complex64::from_polar(m, phi);
    }
    let mut x = istft_samples(&spec)?;
    let mut prev = stft_samples(&x, cfg)?;
    let mut err = consistency_error(&prev, mag);
    let mut start = prev.clone();

    let mut consistency = Vec::with_capacity(iters + 1);
    consistency.push(err);
    for _ in 0..iters {
        project_magnitude(&start, mag, &mut spec);
        let mut x_next = istft_samples(&spec)?;
        let mut next = stft_samples(&x_next, cfg)?;
        let mut err_next = consistency_error(&next, mag);
        let accepted = err_next <= err;
        if !accepted {
            project_magnitude(&prev, mag, &mut spec);
            x_next = istft_samples(&spec)?;
            next = stft_samples(&x_next, cfg)?;
            err_next = consistency_error(&next, mag);
        }
        start.data.copy_from_slice(&next.data);
        if accepted && momentum > 0.0 {
            for ((s, c), p) in start.data.iter_mut().zip(&next.data).zip(&prev.data) {
                *s = c + (c - p) * momentum;
            }
        }
        x = x_next;
        prev = next;
        err = err_next;
        consistency.push(err);
    }

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(GriffinLimOutput {
        samples: x,
        consistency,
    })
}

/// Keeps the phase of `est`, imposes `mag`.
fn project_magnitude(est: &ComplexSpectrogram, mag: &Matrix, out: &mut ComplexSpectrogram) {
    for ((dst, c), &m) in out.data.iter_mut().zip(&est.data).zip(mag.as_slice()) {
        let r = c.norm();
        *dst = if r > 0.0 {
            c * (m / r)
        } else {
            Complex64::new(m, 0.0)
        };
    }
}
