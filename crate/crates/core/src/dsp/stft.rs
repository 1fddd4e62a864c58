use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann.
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
    #[serde(default)]
    pub window: Window,
}

impl Default for StftConfig {
    /// 25 ms frames, 10 ms hop at 16 kHz.
    fn default() -> Self {
        Self {
            frame_length: 400,
            hop_length: 160,
            fft_size: 512,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn new(frame_length: usize, hop_length: usize, fft_size: usize, window: Window) -> Result<Self> {
        let cfg = Self {
            frame_length,
            hop_length,
            fft_size,
            window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 || self.hop_length > self.frame_length || self.frame_length > self.fft_size {
            return Err(Error::InvalidConfig(format!(
                "need 0 < hop ({}) <= frame ({}) <= fft size ({})",
                self.hop_length, self.frame_length, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn window_coefficients(&self) -> Vec<f64> {
        self.window.coefficients(self.frame_length)
    }

    /// Frame count of unpadded analysis over `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.frame_length {
            0
        } else {
            1 + (len - self.frame_length) / self.hop_length
        }
    }

    /// Length of the overlap-add synthesis of `n_frames` frames.
    pub fn signal_length(&self, n_frames: usize) -> usize {
        if n_frames == 0 {
            0
        } else {
            (n_frames - 1) * self.hop_length + self.frame_length
        }
    }

    /// True when every sample of the fully-overlapped region is covered by a
    /// nonzero window value.
    pub fn is_invertible(&self) -> bool {
        let w = self.window_coefficients();
        (0..self.hop_length).all(|r| {
            w.iter()
                .skip(r)
                .step_by(self.hop_length)
                .any(|v| v * v > 0.0)
        })
    }
}

/// One-sided short-time spectrum, `n_frames × (fft_size/2 + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub n_frames: usize,
    pub n_bins: usize,
    pub data: Vec<Complex64>,
    pub config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn zeros(n_frames: usize, config: StftConfig) -> Self {
        let n_bins = config.n_bins();
        Self {
            n_frames,
            n_bins,
            data: vec![Complex64::new(0.0, 0.0); n_frames * n_bins],
            config,
        }
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        &mut self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn magnitude(&self) -> crate::Matrix {
        crate::Matrix::from_vec(
            self.n_frames,
            self.n_bins,
            self.data.iter().map(|c| c.norm()).collect(),
        )
        .expect("shape is consistent by construction")
    }
}

pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    stft_samples(&w.samples, cfg)
}

pub(crate) fn stft_samples(samples: &[f64], cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    if samples.len() < cfg.frame_length {
        return Err(Error::SignalTooShort {
            len: samples.len(),
            needed: cfg.frame_length,
        });
    }
    let n_frames = cfg.n_frames(samples.len());
    let window = cfg.window_coefficients();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let mut out = ComplexSpectrogram::zeros(n_frames, *cfg);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    for t in 0..n_frames {
        let start = t * cfg.hop_length;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (n, (x, w)) in samples[start..start + cfg.frame_length]
            .iter()
            .zip(&window)
            .enumerate()
        {
            buf[n] = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        let n_bins = out.n_bins;
        out.frame_mut(t).copy_from_slice(&buf[..n_bins]);
    }
    Ok(out)
}

/// Least-squares inverse STFT: weighted overlap-add divided by the summed
/// squared window. Samples no frame sees (zero denominator at the edges) are 0.
pub fn istft(s: &ComplexSpectrogram, sample_rate: u32) -> Result<Waveform> {
    Waveform::new(istft_samples(s)?, sample_rate)
}

pub(crate) fn istft_samples(s: &ComplexSpectrogram) -> Result<Vec<f64>> {
    let cfg = &s.config;
    cfg.validate()?;
    if s.n_bins != cfg.n_bins() || s.data.len() != s.n_frames * s.n_bins {
        return Err(Error::DimensionMismatch(format!(
            "spectrogram has {} bins, config expects {}",
            s.n_bins,
            cfg.n_bins()
        )));
    }
    if !cfg.is_invertible() {
        return Err(Error::NotInvertible);
    }
    let len = cfg.signal_length(s.n_frames);
    let window = cfg.window_coefficients();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(cfg.fft_size);
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    let n = cfg.fft_size;
    let scale = 1.0 / n as f64;
    for t in 0..s.n_frames {
        let frame = s.frame(t);
        buf[..s.n_bins].copy_from_slice(frame);
        for k in 1..(n - s.n_bins + 1) {
            buf[n - k] = frame[k].conj();
        }
        // DC and Nyquist must be real for a real signal
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        ifft.process(&mut buf);
        let start = t * cfg.hop_length;
        for (i, w) in window.iter().enumerate() {
            out[start + i] += w * buf[i].re * scale;
            norm[start + i] += w * w;
        }
    }
    for (o, d) in out.iter_mut().zip(&norm) {
        *o = if *d > 0.0 { *o / d } else { 0.0 };
    }
    Ok(out)
}
