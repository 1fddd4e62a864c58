//! Short-time objective intelligibility (STOI) and its extended variant
//! (ESTOI), following the reference implementation's framing, silent-frame
//! removal and one-third-octave analysis.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::resample;
use crate::dsp::Waveform;
use crate::{Error, Matrix, Result};

/// Analysis sample rate.
pub const STOI_FS: u32 = 10000;
const FRAME_LEN: usize = 256;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per intermediate-intelligibility segment (384 ms).
pub const SEGMENT_FRAMES: usize = 30;
/// Lower signal-to-distortion bound of the clipping step, dB.
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;

/// One-third-octave band layout of the analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct OctaveBandConfig {
    pub centers: Vec<f64>,
    pub sample_rate: u32,
    pub segment_frames: usize,
    pub clip_db: f64,
}

impl Default for OctaveBandConfig {
    fn default() -> Self {
        Self {
            centers: (0..NUM_BANDS)
                .map(|k| MIN_FREQ * 2f64.powf(k as f64 / 3.0))
                .collect(),
            sample_rate: STOI_FS,
            segment_frames: SEGMENT_FRAMES,
            clip_db: BETA_DB,
        }
    }
}

/// `hanning(n + 2)[1:-1]`: a symmetric Hann window without its zero endpoints.
fn window(n: usize) -> Vec<f64> {
    let m = (n + 1) as f64;
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / m).cos())
        .collect()
}

/// Band matrix: band `i` sums bins whose frequency lies in
/// `[f_low, f_high)`, edges snapped to the nearest bin.
fn third_octave_matrix() -> Matrix {
    let n_bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * f64::from(STOI_FS) / NFFT as f64)
        .collect();
    let nearest = |f: f64| {
        (0..n_bins)
            .min_by(|&a, &b| (freqs[a] - f).powi(2).total_cmp(&(freqs[b] - f).powi(2)))
            .unwrap()
    };
    let mut obm = Matrix::zeros(NUM_BANDS, n_bins);
    for b in 0..NUM_BANDS {
        let k = b as f64;
        let lo = nearest(MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0));
        let hi = nearest(MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0));
        for j in lo..hi {
            obm[(b, j)] = 1.0;
        }
    }
    obm
}

/// Frame starts `0, hop, ..` strictly below `len − frame`.
fn frame_starts(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(frame)).step_by(hop)
}

/// Drops frames of both signals where `x` is more than the dynamic range
/// below its loudest frame, then overlap-adds the remaining windowed frames.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hop = FRAME_LEN / 2;
    let w = window(FRAME_LEN);
    let starts: Vec<usize> = frame_starts(x.len(), FRAME_LEN, hop).collect();
    let energy: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..FRAME_LEN).map(|i| (w[i] * x[s + i]).powi(2)).sum();
            20.0 * (e.sqrt() + f64::EPSILON).log10()
        })
        .collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy)
        .filter(|(_, &e)| max - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    let out_len = if kept.is_empty() { 0 } else { (kept.len() - 1) * hop + FRAME_LEN };
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (k, &s) in kept.iter().enumerate() {
        for i in 0..FRAME_LEN {
            xs[k * hop + i] += w[i] * x[s + i];
            ys[k * hop + i] += w[i] * y[s + i];
        }
    }
    (xs, ys)
}

/// One-third-octave band envelopes, `bands × frames`.
fn band_envelopes(x: &[f64], obm: &Matrix) -> Matrix {
    let hop = FRAME_LEN / 2;
    let w = window(FRAME_LEN);
    let fft = FftPlanner::new().plan_fft_forward(NFFT);
    let starts: Vec<usize> = frame_starts(x.len(), FRAME_LEN, hop).collect();
    let mut env = Matrix::zeros(NUM_BANDS, starts.len());
    let mut buf = vec![Complex64::default(); NFFT];
    for (t, &s) in starts.iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for i in 0..FRAME_LEN {
            buf[i] = Complex64::new(w[i] * x[s + i], 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..NFFT / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        for (b, p) in obm.mul_vec(&power).into_iter().enumerate() {
            env[(b, t)] = p.sqrt();
        }
    }
    env
}

/// `Σ ab / sqrt(Σa² Σb²)` on already-centred vectors, 0 when either is flat.
/// Written so identical inputs give exactly 1.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

fn centred(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = v.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.into_iter().map(|x| x - mean).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Band envelopes of both signals after resampling and silence removal.
fn prepare(clean: &Waveform, degraded: &Waveform) -> Result<(Matrix, Matrix)> {
    if clean.sample_rate != degraded.sample_rate || clean.len() != degraded.len() {
        return Err(Error::DimensionMismatch(format!(
            "clean is {} samples at {} Hz, degraded is {} samples at {} Hz",
            clean.len(),
            clean.sample_rate,
            degraded.len(),
            degraded.sample_rate
        )));
    }
    let x = resample(clean, STOI_FS)?;
    let y = resample(degraded, STOI_FS)?;
    let (xs, ys) = remove_silent_frames(&x.samples, &y.samples);
    let obm = third_octave_matrix();
    let xe = band_envelopes(&xs, &obm);
    let ye = band_envelopes(&ys, &obm);
    if xe.cols() < SEGMENT_FRAMES {
        return Err(Error::InsufficientDuration {
            frames: xe.cols(),
            needed: SEGMENT_FRAMES,
        });
    }
    Ok((xe, ye))
}

fn segment_row(m: &Matrix, band: usize, end: usize) -> &[f64] {
    &m.row(band)[end - SEGMENT_FRAMES..end]
}

/// Mean correlation of clean and normalized, clipped degraded band envelopes
/// over all bands and 384 ms segments.
pub fn stoi(clean: &Waveform, degraded: &Waveform) -> Result<f64> {
    let (xe, ye) = prepare(clean, degraded)?;
    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for end in SEGMENT_FRAMES..=xe.cols() {
        for b in 0..NUM_BANDS {
            let xs = segment_row(&xe, b, end);
            let ys = segment_row(&ye, b, end);
            let ny = norm(ys);
            let alpha = if ny == 0.0 { 0.0 } else { norm(xs) / ny };
            let yp = centred(ys.iter().zip(xs).map(|(&y, &x)| (y * alpha).min(x * clip)));
            total += correlation(&centred(xs.iter().copied()), &yp);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Rows (bands over time) then columns (time frames over bands) mean- and
/// variance-normalized; returns the normalized segment column-major.
fn row_normalized(m: &Matrix, end: usize) -> Vec<Vec<f64>> {
    (0..NUM_BANDS)
        .map(|b| {
            let r = centred(segment_row(m, b, end).iter().copied());
            let n = norm(&r);
            if n == 0.0 {
                r
            } else {
                r.into_iter().map(|v| v / n).collect()
            }
        })
        .collect()
}

/// Spectral correlation of row/column-normalized 384 ms segments, averaged
/// over segments and frames.
pub fn estoi(clean: &Waveform, degraded: &Waveform) -> Result<f64> {
    let (xe, ye) = prepare(clean, degraded)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for end in SEGMENT_FRAMES..=xe.cols() {
        let xr = row_normalized(&xe, end);
        let yr = row_normalized(&ye, end);
        for n in 0..SEGMENT_FRAMES {
            let xc = centred(xr.iter().map(|r| r[n]));
            let yc = centred(yr.iter().map(|r| r[n]));
            total += correlation(&xc, &yc);
            count += 1;
        }
    }
    Ok(total / count as f64)
}
