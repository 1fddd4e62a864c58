#![allow(dead_code)]

use rand::Rng;
use vidspeech::dataio::PairedSequence;
use vidspeech::model::{FrameClip, ModelDims, ModelParams};
use vidspeech::rng::rng_from;
use vidspeech::Matrix;

/// Small model: 4-dim audio and latent, 8 hidden units, 8×8 frames, K = 3.
pub fn toy_dims() -> ModelDims {
    ModelDims {
        audio_dim: 4,
        embed_dim: 4,
        hidden_dim: 8,
        head_hidden_dim: 4,
        latent_dim: 4,
        context_frames: 3,
        frame_height: 8,
        frame_width: 8,
        frame_channels: 1,
        conv_channels: vec![2, 3],
    }
}

/// Every tensor, biases included, uniform in `[-scale, scale]`.
pub fn randomized(dims: ModelDims, seed: u64, scale: f64) -> ModelParams {
    let mut p = ModelParams::zeros(dims).unwrap();
    for (i, t) in p.tensors.iter_mut().enumerate() {
        let mut rng = rng_from(seed, &[i as u64]);
        t.data.iter_mut().for_each(|v| *v = rng.random_range(-scale..scale));
    }
    p
}

pub fn random_clip(dims: &ModelDims, seed: u64, center: usize) -> FrameClip {
    let mut rng = rng_from(seed, &[center as u64]);
    FrameClip {
        pixels: (0..dims.clip_len()).map(|_| rng.random::<f64>()).collect(),
        context_frames: dims.context_frames,
        height: dims.frame_height,
        width: dims.frame_width,
        channels: dims.frame_channels,
        center_index: center,
    }
}

pub fn random_clips(dims: &ModelDims, n: usize, seed: u64) -> Vec<FrameClip> {
    (0..n).map(|t| random_clip(dims, seed, t)).collect()
}

pub fn random_audio(dims: &ModelDims, n: usize, seed: u64) -> Matrix {
    let mut rng = rng_from(seed, &[0xa0]);
    let data = (0..n * dims.audio_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(n, dims.audio_dim, data).unwrap()
}

pub fn random_batch(dims: &ModelDims, n_examples: usize, n_steps: usize, seed: u64) -> Vec<PairedSequence> {
    (0..n_examples)
        .map(|i| {
            let s = seed * 1000 + i as u64;
            PairedSequence::new(format!("ex{i}"), random_clips(dims, n_steps, s), random_audio(dims, n_steps, s)).unwrap()
        })
        .collect()
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Harmonic complex with a gliding pitch, a spectral tilt and a 3 Hz
/// syllable envelope that dips to -20 dB between syllables.
pub fn speech_like(sample_rate: u32, secs: f64) -> vidspeech::dsp::Waveform {
    let n = (sample_rate as f64 * secs) as usize;
    let mut phase = 0.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let f0 = 140.0 + 40.0 * (2.0 * std::f64::consts::PI * 0.7 * t).sin();
            phase += 2.0 * std::f64::consts::PI * f0 / sample_rate as f64;
            let env = 0.1 + 0.9 * (2.0 * std::f64::consts::PI * 3.0 * t).sin().max(0.0).powi(2);
            let tone: f64 = (1..=20)
                .filter(|k| (*k as f64) * f0 < sample_rate as f64 / 2.0)
                .map(|k| (k as f64 * phase).sin() / k as f64)
                .sum();
            0.3 * env * tone
        })
        .collect();
    vidspeech::dsp::Waveform::new(samples, sample_rate).unwrap()
}

/// `x` plus seeded white noise at the given SNR in dB.
pub fn with_noise(x: &vidspeech::dsp::Waveform, snr_db: f64, seed: u64) -> vidspeech::dsp::Waveform {
    let mut rng = rng_from(seed, &[0x0e]);
    let noise = vidspeech::rng::standard_normal_vec(&mut rng, x.len());
    let px = x.samples.iter().map(|v| v * v).sum::<f64>();
    let pn = noise.iter().map(|v| v * v).sum::<f64>();
    let g = (px / pn / 10f64.powf(snr_db / 10.0)).sqrt();
    let samples = x.samples.iter().zip(&noise).map(|(a, b)| a + g * b).collect();
    vidspeech::dsp::Waveform::new(samples, x.sample_rate).unwrap()
}
