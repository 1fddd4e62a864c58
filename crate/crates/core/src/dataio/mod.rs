//! Dataset plumbing: WAV I/O, context clips, audio/video stream alignment,
//! the on-disk dataset layout and a synthetic one-to-many paired task.

mod clips;
mod dataset;
mod synthetic;
mod wav;

pub use clips::{make_context_clips, Frame};
pub use dataset::{
    load_dataset, load_frames, load_sequence, read_frontend, save_frames, write_dataset, AUDIO_FILE, FRAME_DIR, FRONTEND_FILE,
    MANIFEST,
};
pub use synthetic::{generate_synthetic, SyntheticDataset, SyntheticExample, SyntheticScript, SyntheticTaskConfig};
pub use wav::{decode_wav, encode_wav, load_wav, save_wav};

use serde::{Deserialize, Serialize};

use crate::dsp::{griffin_lim, invert_mel, FeatureConfig, MelFilterbank, MelSpectrogram, Waveform};
use crate::model::FrameClip;
use crate::{Error, Matrix, Result};

/// Mel features plus the video rate they are grouped against.
///
/// Each video step owns `sample_rate / fps / hop` consecutive mel frames,
/// concatenated into one model input `a_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioFrontend {
    pub features: FeatureConfig,
    pub fps: u32,
}

impl AudioFrontend {
    pub fn validate(&self) -> Result<()> {
        self.features.stft.validate()?;
        let sr = self.features.sample_rate;
        let hop = self.features.stft.hop_length;
        if self.fps == 0 || !sr.is_multiple_of(self.fps) || !((sr / self.fps) as usize).is_multiple_of(hop) {
            return Err(Error::InvalidConfig(format!(
                "{sr} Hz at {} fps does not split into whole {hop}-sample hops per video frame",
                self.fps
            )));
        }
        Ok(())
    }

    pub fn samples_per_step(&self) -> usize {
        (self.features.sample_rate / self.fps) as usize
    }

    pub fn mel_frames_per_step(&self) -> usize {
        self.samples_per_step() / self.features.stft.hop_length
    }

    /// Length of one model input `a_t`.
    pub fn audio_dim(&self) -> usize {
        self.mel_frames_per_step() * self.features.n_mels
    }

    /// Concatenates each run of `mel_frames_per_step` mel rows into one row.
    pub fn group(&self, mel: &Matrix) -> Result<Matrix> {
        let per = self.mel_frames_per_step();
        if !mel.rows().is_multiple_of(per) || mel.cols() != self.features.n_mels {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} mel matrix cannot be grouped {per} frames at a time",
                mel.rows(),
                mel.cols()
            )));
        }
        Matrix::from_vec(mel.rows() / per, per * mel.cols(), mel.as_slice().to_vec())
    }

    /// Inverse of [`group`](Self::group).
    pub fn ungroup(&self, audio: &Matrix) -> Result<MelSpectrogram> {
        if audio.cols() != self.audio_dim() {
            return Err(Error::DimensionMismatch(format!(
                "audio features have {} values per step, front end produces {}",
                audio.cols(),
                self.audio_dim()
            )));
        }
        let n_mels = self.features.n_mels;
        Ok(MelSpectrogram {
            frames: Matrix::from_vec(audio.as_slice().len() / n_mels, n_mels, audio.as_slice().to_vec())?,
            config: self.features.stft,
            log_floor: self.features.log_floor,
        })
    }

    /// Mel features for exactly `n_steps` video steps.
    ///
    /// The waveform must be within one hop of `n_steps` video frames long. It
    /// is trimmed or zero-padded to exactly that length, then padded by
    /// `frame_length − hop` trailing zeros so the unpadded STFT yields one mel
    /// frame per hop.
    pub fn featurize(&self, w: &Waveform, fb: &MelFilterbank, n_steps: usize) -> Result<Matrix> {
        self.validate()?;
        if n_steps == 0 {
            return Err(Error::Empty("video stream".into()));
        }
        if w.sample_rate != self.features.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "audio is {} Hz, front end expects {} Hz",
                w.sample_rate, self.features.sample_rate
            )));
        }
        let cfg = &self.features.stft;
        let expected = n_steps * self.samples_per_step();
        if w.len().abs_diff(expected) > cfg.hop_length {
            return Err(Error::DurationMismatch {
                audio_secs: w.duration_secs(),
                video_secs: n_steps as f64 / f64::from(self.fps),
            });
        }
        let mut samples = w.samples.clone();
        samples.resize(expected + cfg.frame_length - cfg.hop_length, 0.0);
        let padded = Waveform::new(samples, w.sample_rate)?;
        let mel = self.features.mel(&padded, fb)?;
        debug_assert_eq!(mel.n_frames(), n_steps * self.mel_frames_per_step());
        self.group(&mel.frames)
    }

    /// Grouped features back to a waveform via mel inversion and Griffin-Lim.
    pub fn synthesize(&self, audio: &Matrix, fb: &MelFilterbank, iters: usize, seed: u64) -> Result<Waveform> {
        let mel = self.ungroup(audio)?;
        let mag = invert_mel(&mel, fb)?;
        let out = griffin_lim(&mag, &self.features.stft, iters, seed)?;
        Waveform::new(out.samples, self.features.sample_rate)
    }
}

/// Equal-length frame and audio streams for one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSequence {
    pub id: String,
    pub clips: Vec<FrameClip>,
    /// `N × audio_dim` grouped log-mel features.
    pub audio: Matrix,
}

impl PairedSequence {
    pub fn new(id: impl Into<String>, clips: Vec<FrameClip>, audio: Matrix) -> Result<Self> {
        let id = id.into();
        if clips.len() != audio.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{id}: {} frame clips but {} audio steps",
                clips.len(),
                audio.rows()
            )));
        }
        if clips.is_empty() {
            return Err(Error::Empty(format!("sequence {id}")));
        }
        Ok(Self { id, clips, audio })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// Pairs a waveform with a frame stream sampled at `frontend.fps`.
pub fn align_streams(
    id: &str,
    wav: &Waveform,
    frames: &[Frame],
    frontend: &AudioFrontend,
    fb: &MelFilterbank,
    context_frames: usize,
) -> Result<PairedSequence> {
    if frames.is_empty() {
        return Err(Error::Empty(format!("{id}: video stream")));
    }
    let audio = frontend.featurize(wav, fb, frames.len())?;
    let clips = make_context_clips(frames, context_frames)?;
    PairedSequence::new(id, clips, audio)
}
