//! A desk-scale paired task with a controllable one-to-many mapping.
//!
//! Each frame shows a bright horizontal bar ("mouth"). Its thickness follows
//! the loudness envelope and its horizontal slot selects a set of
//! `modes_per_input` pitches. Which pitch of the set is voiced is drawn once
//! per sequence from a stream that the frame render never sees, so with two
//! or more modes the same frames are consistent with several audios.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{align_streams, AudioFrontend, Frame, PairedSequence};
use crate::dsp::{FeatureConfig, MelFilterbank, Waveform};
use crate::rng::{derive_seed, rng_from};
use crate::{Error, Matrix, Result};

const BASE_PITCH_HZ: f64 = 120.0;
const HARMONICS: [f64; 3] = [1.0, 0.5, 0.25];
const AMPLITUDE: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTaskConfig {
    pub n_sequences: usize,
    /// Video steps per sequence.
    pub seq_length: usize,
    pub image_height: usize,
    pub image_width: usize,
    /// Distinct audios consistent with one frame stream; 1 is the
    /// deterministic control.
    pub modes_per_input: usize,
    /// Horizontal bar slots.
    pub n_positions: usize,
    /// Steps per syllable; position and peak loudness are constant within one.
    pub segment_length: usize,
    /// Standard deviation of additive pixel noise.
    pub noise_level: f64,
    pub context_frames: usize,
    pub fps: u32,
    pub seed: u64,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        Self {
            n_sequences: 16,
            seq_length: 20,
            image_height: 32,
            image_width: 32,
            modes_per_input: 2,
            n_positions: 4,
            segment_length: 5,
            noise_level: 0.02,
            context_frames: 5,
            fps: 25,
            seed: 0,
        }
    }
}

impl SyntheticTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_sequences == 0 || self.seq_length == 0 {
            return bad("n_sequences and seq_length must be positive".into());
        }
        if self.modes_per_input == 0 || self.n_positions == 0 || self.segment_length == 0 {
            return bad("modes_per_input, n_positions and segment_length must be positive".into());
        }
        if self.image_height < 2 || self.image_width < self.n_positions {
            return bad(format!(
                "{}x{} frames cannot hold {} bar positions",
                self.image_height, self.image_width, self.n_positions
            ));
        }
        if self.noise_level < 0.0 || !self.noise_level.is_finite() {
            return bad(format!("noise_level must be finite and nonnegative, got {}", self.noise_level));
        }
        if self.context_frames.is_multiple_of(2) {
            return bad(format!("context_frames must be odd, got {}", self.context_frames));
        }
        self.frontend().validate()
    }

    pub fn frontend(&self) -> AudioFrontend {
        AudioFrontend {
            features: FeatureConfig::synthetic(),
            fps: self.fps,
        }
    }

    /// Fundamental for bar slot `position` voiced in `mode`. The sets of
    /// different slots interleave and modes of one slot are spread evenly
    /// across two octaves in log frequency.
    pub fn pitch(&self, position: usize, mode: usize) -> f64 {
        let classes = (self.n_positions * self.modes_per_input) as f64;
        let c = (position + mode * self.n_positions) as f64;
        BASE_PITCH_HZ * 2f64.powf(2.0 * c / classes)
    }
}

/// The latent-free part of a sequence: what the frames show.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScript {
    /// Bar slot per step.
    pub positions: Vec<usize>,
    /// Bar thickness and loudness per step, in `(0, 1]`.
    pub openness: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticExample {
    pub id: String,
    pub seed: u64,
    pub mode: usize,
    pub script: SyntheticScript,
    pub frames: Vec<Frame>,
    pub waveform: Waveform,
    pub sequence: PairedSequence,
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub config: SyntheticTaskConfig,
    pub frontend: AudioFrontend,
    pub filterbank: MelFilterbank,
    pub examples: Vec<SyntheticExample>,
}

impl SyntheticDataset {
    pub fn sequences(&self) -> Vec<PairedSequence> {
        self.examples.iter().map(|e| e.sequence.clone()).collect()
    }

    /// Features of example `index` re-voiced in `mode`, frames unchanged.
    pub fn mode_features(&self, index: usize, mode: usize) -> Result<Matrix> {
        let ex = self
            .examples
            .get(index)
            .ok_or_else(|| Error::InvalidConfig(format!("no example {index}")))?;
        if mode >= self.config.modes_per_input {
            return Err(Error::InvalidConfig(format!(
                "mode {mode} out of range for {} modes",
                self.config.modes_per_input
            )));
        }
        let w = render_audio(&self.config, &ex.script, mode)?;
        self.frontend.featurize(&w, &self.filterbank, ex.frames.len())
    }
}

fn draw_script(cfg: &SyntheticTaskConfig, seed: u64) -> SyntheticScript {
    let mut rng = rng_from(seed, &[0x5c]);
    let mut positions = Vec::with_capacity(cfg.seq_length);
    let mut openness = Vec::with_capacity(cfg.seq_length);
    let mut prev = usize::MAX;
    while positions.len() < cfg.seq_length {
        // a new slot every syllable, so each one is audibly distinct
        let mut pos = rng.random_range(0..cfg.n_positions);
        if cfg.n_positions > 1 && pos == prev {
            pos = (pos + 1 + rng.random_range(0..cfg.n_positions - 1)) % cfg.n_positions;
        }
        prev = pos;
        let peak = rng.random_range(0.5..1.0);
        for j in 0..cfg.segment_length {
            if positions.len() == cfg.seq_length {
                break;
            }
            let shape = (PI * (j as f64 + 0.5) / cfg.segment_length as f64).sin();
            positions.push(pos);
            openness.push(0.15 + 0.85 * peak * shape);
        }
    }
    SyntheticScript { positions, openness }
}

fn quantize_pixel(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Renders frames on the 8-bit grid so they survive a PNG round trip exactly.
fn render_frames(cfg: &SyntheticTaskConfig, script: &SyntheticScript, seed: u64) -> Vec<Frame> {
    let (h, w) = (cfg.image_height, cfg.image_width);
    let mut rng = rng_from(seed, &[0x6e]);
    let noise = Normal::new(0.0, cfg.noise_level.max(f64::MIN_POSITIVE)).expect("valid normal");
    let slot = w as f64 / cfg.n_positions as f64;
    script
        .positions
        .iter()
        .zip(&script.openness)
        .map(|(&pos, &open)| {
            let (x0, x1) = (pos as f64 * slot, (pos + 1) as f64 * slot);
            let half = 0.5 * open * h as f64 * 0.5;
            let (y0, y1) = (h as f64 / 2.0 - half, h as f64 / 2.0 + half);
            let mut data = Vec::with_capacity(h * w);
            for r in 0..h {
                let cover_y = overlap(r as f64, y0, y1);
                for c in 0..w {
                    let mut v = cover_y * overlap(c as f64, x0, x1);
                    if cfg.noise_level > 0.0 {
                        v += noise.sample(&mut rng);
                    }
                    data.push(quantize_pixel(v));
                }
            }
            Frame::new(h, w, 1, data).expect("frame shape")
        })
        .collect()
}

/// Fraction of the unit cell `[p, p + 1)` covered by `[lo, hi)`.
fn overlap(p: f64, lo: f64, hi: f64) -> f64 {
    ((p + 1.0).min(hi) - p.max(lo)).max(0.0)
}

/// Harmonic tone with a continuous phase, the pitch switched per step and the
/// envelope interpolated linearly between step centres. Samples are put on
/// the 16-bit grid so a WAV round trip is exact.
fn render_audio(cfg: &SyntheticTaskConfig, script: &SyntheticScript, mode: usize) -> Result<Waveform> {
    let fe = cfg.frontend();
    let sr = f64::from(fe.features.sample_rate);
    let spf = fe.samples_per_step();
    let n = script.positions.len();
    let env_at = |t: f64| {
        let s = t / spf as f64 - 0.5;
        if s <= 0.0 {
            script.openness[0]
        } else if s >= (n - 1) as f64 {
            script.openness[n - 1]
        } else {
            let i = s.floor() as usize;
            let f = s - i as f64;
            script.openness[i] * (1.0 - f) + script.openness[i + 1] * f
        }
    };
    let mut phase = 0.0;
    let mut samples = Vec::with_capacity(n * spf);
    for (i, &pos) in script.positions.iter().enumerate() {
        let f0 = cfg.pitch(pos, mode);
        for k in 0..spf {
            let t = (i * spf + k) as f64;
            let tone: f64 = HARMONICS
                .iter()
                .enumerate()
                .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
                .sum();
            let v = AMPLITUDE * env_at(t) * tone;
            samples.push((v * 32768.0).round() / 32768.0);
            phase = (phase + 2.0 * PI * f0 / sr) % (2.0 * PI);
        }
    }
    Waveform::new(samples, fe.features.sample_rate)
}

/// Generates `n_sequences` paired examples. Example `i` uses seed
/// `derive_seed(cfg.seed, [i])`; its script, pixel noise and mode come from
/// independent sub-streams of that seed.
pub fn generate_synthetic(cfg: &SyntheticTaskConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let frontend = cfg.frontend();
    let filterbank = frontend.features.filterbank()?;
    let mut examples = Vec::with_capacity(cfg.n_sequences);
    for i in 0..cfg.n_sequences {
        let seed = derive_seed(cfg.seed, &[i as u64]);
        let id = format!("seq{i:04}");
        let script = draw_script(cfg, seed);
        let frames = render_frames(cfg, &script, seed);
        let mode = rng_from(seed, &[0x6d]).random_range(0..cfg.modes_per_input);
        let waveform = render_audio(cfg, &script, mode)?;
        let sequence = align_streams(&id, &waveform, &frames, &frontend, &filterbank, cfg.context_frames)?;
        examples.push(SyntheticExample {
            id,
            seed,
            mode,
            script,
            frames,
            waveform,
            sequence,
        });
    }
    Ok(SyntheticDataset {
        config: cfg.clone(),
        frontend,
        filterbank,
        examples,
    })
}
