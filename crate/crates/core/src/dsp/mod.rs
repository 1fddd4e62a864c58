//! Signal-processing kernels: STFT/ISTFT, mel features, mel inversion and
//! Griffin-Lim phase reconstruction. Everything here is a pure function of its
//! inputs (and an explicit seed where randomness is involved).

mod container;
mod features;
mod griffin_lim;
mod mel;
mod stft;

pub use container::{read_matrix, read_matrix_from, write_matrix, write_matrix_to, MATRIX_MAGIC};
pub use features::FeatureConfig;
pub use griffin_lim::{
    consistency_error, griffin_lim, griffin_lim_with_momentum, GriffinLimOutput, GRIFFIN_LIM_MOMENTUM,
};
pub use mel::{hz_to_mel, invert_mel, mel_spectrogram, mel_to_hz, MelFilterbank, MelSpectrogram};
pub use stft::{istft, stft, ComplexSpectrogram, StftConfig, Window};

use crate::{Error, Result};

/// Time-domain mono audio.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Scales so the largest magnitude is `target` (no-op on silence).
    pub fn peak_normalized(mut self, target: f64) -> Self {
        let peak = self.peak();
        if peak > 0.0 {
            let g = target / peak;
            self.samples.iter_mut().for_each(|s| *s *= g);
        }
        self
    }
}
