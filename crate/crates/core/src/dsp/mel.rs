use nalgebra::DMatrix;

use super::stft::stft_samples;
use super::{StftConfig, Waveform};
use crate::{Error, Matrix, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with peaks equally spaced on the mel scale.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels × (fft_size/2 + 1)`, peak value 1 per filter.
    pub weights: Matrix,
    /// Peak frequency of each filter in Hz.
    pub centers: Vec<f64>,
    pub sample_rate: u32,
    pub fft_size: usize,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, cfg: &StftConfig, sample_rate: u32, f_min: f64, f_max: f64) -> Result<Self> {
        cfg.validate()?;
        let nyquist = f64::from(sample_rate) / 2.0;
        if n_mels == 0 {
            return Err(Error::InvalidConfig("n_mels must be at least 1".into()));
        }
        if f_max > nyquist {
            return Err(Error::InvalidConfig(format!(
                "f_max {f_max} Hz exceeds the Nyquist frequency {nyquist} Hz"
            )));
        }
        if !(0.0 <= f_min && f_min < f_max) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= f_min ({f_min}) < f_max ({f_max})"
            )));
        }
        let n_bins = cfg.n_bins();
        let (m_lo, m_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / cfg.fft_size as f64;
        let mut weights = Matrix::zeros(n_mels, n_bins);
        for m in 0..n_mels {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= center {
                    (f - lo) / (center - lo)
                } else if f > center && f < hi {
                    (hi - f) / (hi - center)
                } else {
                    0.0
                };
                weights[(m, k)] = w;
            }
            if weights.row(m).iter().all(|&w| w == 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "mel band {m} ({lo:.1}-{hi:.1} Hz) contains no FFT bin; use fewer bands or a larger FFT"
                )));
            }
        }
        Ok(Self {
            weights,
            centers: edges[1..=n_mels].to_vec(),
            sample_rate,
            fft_size: cfg.fft_size,
        })
    }

    /// Wraps an arbitrary nonnegative projection (used for testing inversion).
    pub fn from_weights(weights: Matrix, sample_rate: u32) -> Self {
        let fft_size = (weights.cols() - 1) * 2;
        Self {
            centers: Vec::new(),
            weights,
            sample_rate,
            fft_size,
        }
    }

    pub fn n_mels(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.cols()
    }

    /// Moore-Penrose pseudo-inverse, `n_bins × n_mels`.
    pub fn pseudo_inverse(&self) -> Result<Matrix> {
        let (r, c) = self.weights.shape();
        let m = DMatrix::from_row_slice(r, c, self.weights.as_slice());
        let pinv = m
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::InvalidConfig(format!("pseudo-inverse failed: {e}")))?;
        let mut out = Matrix::zeros(c, r);
        for i in 0..c {
            for j in 0..r {
                out[(i, j)] = pinv[(i, j)];
            }
        }
        Ok(out)
    }
}

/// Log-compressed mel magnitudes, one row per STFT frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    /// `T × n_mels`, natural log.
    pub frames: Matrix,
    pub config: StftConfig,
    pub log_floor: f64,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_mels(&self) -> usize {
        self.frames.cols()
    }
}

/// `log(max(fb · |stft(w)|, log_floor))` per frame.
pub fn mel_spectrogram(
    w: &Waveform,
    fb: &MelFilterbank,
    cfg: &StftConfig,
    log_floor: f64,
) -> Result<MelSpectrogram> {
    if fb.n_bins() != cfg.n_bins() || fb.sample_rate != w.sample_rate {
        return Err(Error::DimensionMismatch(format!(
            "filterbank built for {} bins at {} Hz, signal needs {} bins at {} Hz",
            fb.n_bins(),
            fb.sample_rate,
            cfg.n_bins(),
            w.sample_rate
        )));
    }
    if log_floor.is_nan() || log_floor <= 0.0 {
        return Err(Error::InvalidConfig(format!("log floor must be positive, got {log_floor}")));
    }
    let spec = stft_samples(&w.samples, cfg)?;
    let mag = spec.magnitude();
    let mut frames = Matrix::zeros(spec.n_frames, fb.n_mels());
    for t in 0..spec.n_frames {
        let projected = fb.weights.mul_vec(mag.row(t));
        for (dst, v) in frames.row_mut(t).iter_mut().zip(projected) {
            *dst = v.max(log_floor).ln();
        }
    }
    Ok(MelSpectrogram {
        frames,
        config: *cfg,
        log_floor,
    })
}

/// Approximate linear magnitudes from log-mel values: `exp`, pseudo-inverse of
/// the filterbank, then negatives clamped to zero. Returns `T × n_bins`.
pub fn invert_mel(m: &MelSpectrogram, fb: &MelFilterbank) -> Result<Matrix> {
    if m.n_mels() != fb.n_mels() {
        return Err(Error::DimensionMismatch(format!(
            "mel spectrogram has {} bands, filterbank has {}",
            m.n_mels(),
            fb.n_mels()
        )));
    }
    let pinv = fb.pseudo_inverse()?;
    let mut out = Matrix::zeros(m.n_frames(), fb.n_bins());
    for t in 0..m.n_frames() {
        let lin: Vec<f64> = m.frames.row(t).iter().map(|v| v.exp()).collect();
        for (dst, v) in out.row_mut(t).iter_mut().zip(pinv.mul_vec(&lin)) {
            *dst = v.max(0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dsp::Window;

    fn cfg() -> StftConfig {
        StftConfig::new(400, 160, 512, Window::Hann).unwrap()
    }

    fn tone(freq: f64, amp: f64, sr: u32, len: usize) -> Waveform {
        let s = (0..len)
            .map(|n| amp * (2.0 * PI * freq * n as f64 / f64::from(sr)).sin())
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    #[test]
    fn mel_scale_reference_points() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let expected = 2595.0 * (1.0f64 + 1000.0 / 700.0).log10();
        assert!((hz_to_mel(1000.0) - expected).abs() < 1e-12);
        assert!((hz_to_mel(1000.0) - 999.99).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(3210.0)) - 3210.0).abs() < 1e-9);
    }

    #[test]
    fn filterbank_structure() {
        let fb = MelFilterbank::new(80, &cfg(), 16000, 55.0, 8000.0).unwrap();
        assert_eq!(fb.weights.shape(), (80, 257));
        assert!(fb.weights.as_slice().iter().all(|&w| (0.0..=1.0).contains(&w)));
        assert!(fb.centers.windows(2).all(|p| p[1] > p[0]));
        let supports: Vec<(usize, usize)> = (0..80)
            .map(|m| {
                let row = fb.weights.row(m);
                let nz: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
                let (first, last) = (nz[0], *nz.last().unwrap());
                // one contiguous interval
                assert_eq!(nz.len(), last - first + 1, "band {m} support is not contiguous");
                (first, last)
            })
            .collect();
        for m in 0..78 {
            assert!(supports[m].1 < supports[m + 2].0, "bands {m} and {} overlap", m + 2);
        }
    }

    #[test]
    fn rejects_f_max_above_nyquist() {
        assert!(MelFilterbank::new(20, &cfg(), 16000, 0.0, 8001.0).is_err());
        assert!(MelFilterbank::new(0, &cfg(), 16000, 0.0, 8000.0).is_err());
        assert!(MelFilterbank::new(20, &cfg(), 16000, 300.0, 300.0).is_err());
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let fb = MelFilterbank::new(40, &cfg(), 16000, 55.0, 8000.0).unwrap();
        let w = Waveform::new(vec![0.0; 4000], 16000).unwrap();
        let m = mel_spectrogram(&w, &fb, &cfg(), 1e-5).unwrap();
        assert!(m.frames.as_slice().iter().all(|&v| v == 1e-5f64.ln()));
    }

    #[test]
    fn tone_at_band_center_wins_that_band() {
        let fb = MelFilterbank::new(40, &cfg(), 16000, 55.0, 8000.0).unwrap();
        for band in [8, 15, 30] {
            let w = tone(fb.centers[band], 0.5, 16000, 4000);
            let m = mel_spectrogram(&w, &fb, &cfg(), 1e-5).unwrap();
            for t in 0..m.n_frames() {
                let row = m.frames.row(t);
                let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                assert_eq!(argmax, band, "frame {t}");
            }
        }
    }

    #[test]
    fn doubling_amplitude_shifts_by_ln2() {
        let fb = MelFilterbank::new(40, &cfg(), 16000, 55.0, 8000.0).unwrap();
        let a = mel_spectrogram(&tone(440.0, 0.2, 16000, 4000), &fb, &cfg(), 1e-5).unwrap();
        let b = mel_spectrogram(&tone(440.0, 0.4, 16000, 4000), &fb, &cfg(), 1e-5).unwrap();
        let floor = 1e-5f64.ln();
        for (x, y) in a.frames.as_slice().iter().zip(b.frames.as_slice()) {
            if *x > floor && *y > floor {
                assert!((y - x - 2f64.ln()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_filterbank_round_trips_exp() {
        let fb = MelFilterbank::from_weights(Matrix::identity(9), 16000);
        let frames = Matrix::from_vec(2, 9, (0..18).map(|i| (i as f64 - 9.0) / 4.0).collect()).unwrap();
        let m = MelSpectrogram {
            frames: frames.clone(),
            config: StftConfig::new(16, 4, 16, Window::Hann).unwrap(),
            log_floor: 1e-5,
        };
        let mag = invert_mel(&m, &fb).unwrap();
        for (a, b) in mag.as_slice().iter().zip(frames.as_slice()) {
            assert!((a - b.exp()).abs() < 1e-12 * b.exp().max(1.0));
        }
    }

    #[test]
    fn inversion_of_floor_is_nonnegative() {
        let fb = MelFilterbank::new(40, &cfg(), 16000, 55.0, 8000.0).unwrap();
        let w = Waveform::new(vec![0.0; 2000], 16000).unwrap();
        let m = mel_spectrogram(&w, &fb, &cfg(), 1e-5).unwrap();
        let mag = invert_mel(&m, &fb).unwrap();
        assert!(mag.as_slice().iter().all(|&v| v >= 0.0));
        assert!(mag.as_slice().iter().cloned().fold(0.0, f64::max) < 1e-3);
    }

    #[test]
    fn inversion_reprojects_close_to_the_input() {
        let fb = MelFilterbank::new(80, &cfg(), 16000, 55.0, 8000.0).unwrap();
        let sr = 16000;
        let s: Vec<f64> = (0..8000)
            .map(|n| {
                let t = n as f64 / f64::from(sr);
                let env = 0.6 + 0.4 * (2.0 * PI * 3.0 * t).sin();
                env * (1..=5)
                    .map(|h| (2.0 * PI * 140.0 * h as f64 * t).sin() / h as f64)
                    .sum::<f64>()
                    * 0.3
            })
            .collect();
        let w = Waveform::new(s, sr).unwrap();
        let m = mel_spectrogram(&w, &fb, &cfg(), 1e-5).unwrap();
        let mag = invert_mel(&m, &fb).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..m.n_frames() {
            let target: Vec<f64> = m.frames.row(t).iter().map(|v| v.exp()).collect();
            let re = fb.weights.mul_vec(mag.row(t));
            num += re.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            den += target.iter().map(|b| b * b).sum::<f64>();
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative re-projection error {rel}");
    }

    #[test]
    fn mismatched_filterbank_is_rejected() {
        let fb = MelFilterbank::new(20, &cfg(), 16000, 55.0, 8000.0).unwrap();
        let w = Waveform::new(vec![0.0; 4000], 8000).unwrap();
        assert!(matches!(
            mel_spectrogram(&w, &fb, &cfg(), 1e-5),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
