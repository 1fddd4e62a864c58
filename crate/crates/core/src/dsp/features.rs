use serde::{Deserialize, Serialize};

use super::{mel_spectrogram, MelFilterbank, MelSpectrogram, StftConfig, Waveform, Window};
use crate::Result;

/// Everything needed to turn a waveform into the model's mel features and back.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub stft: StftConfig,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    /// 16 kHz speech: 25 ms / 10 ms frames, 512-point FFT, 80 bands.
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            stft: StftConfig::default(),
            n_mels: 80,
            f_min: 55.0,
            f_max: 8000.0,
            log_floor: 1e-5,
        }
    }
}

impl FeatureConfig {
    /// 8 kHz variant used by the synthetic task: same frame timing, 20 bands.
    pub fn synthetic() -> Self {
        Self {
            sample_rate: 8000,
            stft: StftConfig {
                frame_length: 200,
                hop_length: 80,
                fft_size: 256,
                window: Window::Hann,
            },
            n_mels: 20,
            f_min: 55.0,
            f_max: 4000.0,
            log_floor: 1e-5,
        }
    }

    /// Settings for analysing audio recorded at `sample_rate`: the synthetic
    /// variant at 8 kHz, otherwise the speech defaults with the band edge
    /// capped at Nyquist.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        if sample_rate == 8000 {
            return Self::synthetic();
        }
        let d = Self::default();
        Self {
            sample_rate,
            f_max: d.f_max.min(f64::from(sample_rate) / 2.0),
            ..d
        }
    }

    pub fn filterbank(&self) -> Result<MelFilterbank> {
        MelFilterbank::new(self.n_mels, &self.stft, self.sample_rate, self.f_min, self.f_max)
    }

    pub fn mel(&self, w: &Waveform, fb: &MelFilterbank) -> Result<MelSpectrogram> {
        mel_spectrogram(w, fb, &self.stft, self.log_floor)
    }
}
