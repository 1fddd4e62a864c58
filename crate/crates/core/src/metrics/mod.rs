//! Objective evaluation of generated speech.

mod resample;
mod stoi;

pub use self::resample::resample;
pub use self::stoi::{estoi, stoi, OctaveBandConfig, SEGMENT_FRAMES, STOI_FS};

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dataio::load_wav;
use crate::dsp::{FeatureConfig, MelSpectrogram, Waveform};
use crate::{Error, Result};

/// Mean absolute difference over all cells.
pub fn mel_l1(reference: &MelSpectrogram, hypothesis: &MelSpectrogram) -> Result<f64> {
    let (a, b) = (&reference.frames, &hypothesis.frames);
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "mel shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.as_slice().is_empty() {
        return Err(Error::Empty("mel spectrogram".into()));
    }
    let sum: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.as_slice().len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntelligibilityScore {
    pub stoi: f64,
    pub estoi: f64,
    pub mel_l1: f64,
}

/// Scores one pair. The hypothesis is resampled to the reference rate and
/// both are cut to the shorter length; mel features are taken at the
/// front end's rate.
pub fn evaluate_pair(reference: &Waveform, hypothesis: &Waveform, features: &FeatureConfig) -> Result<IntelligibilityScore> {
    let hyp = resample(hypothesis, reference.sample_rate)?;
    let n = reference.len().min(hyp.len());
    let x = Waveform::new(reference.samples[..n].to_vec(), reference.sample_rate)?;
    let y = Waveform::new(hyp.samples[..n].to_vec(), reference.sample_rate)?;
    let fb = features.filterbank()?;
    let xm = features.mel(&resample(&x, features.sample_rate)?, &fb)?;
    let ym = features.mel(&resample(&y, features.sample_rate)?, &fb)?;
    Ok(IntelligibilityScore {
        stoi: stoi(&x, &y)?,
        estoi: estoi(&x, &y)?,
        mel_l1: mel_l1(&xm, &ym)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub file: String,
    /// The error message when the pair could not be scored.
    pub outcome: std::result::Result<IntelligibilityScore, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchReport {
    /// Sorted by file name.
    pub rows: Vec<EvalRow>,
    /// Over the rows that scored; NaN when none did.
    pub mean: IntelligibilityScore,
    /// Population standard deviation over the rows that scored.
    pub std: IntelligibilityScore,
}

impl BatchReport {
    pub fn from_rows(mut rows: Vec<EvalRow>) -> Self {
        rows.sort_by(|a, b| a.file.cmp(&b.file));
        let ok: Vec<IntelligibilityScore> = rows.iter().filter_map(|r| r.outcome.clone().ok()).collect();
        let n = ok.len() as f64;
        let stat = |f: fn(&IntelligibilityScore) -> f64| {
            let mean = ok.iter().map(f).sum::<f64>() / n;
            let var = ok.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (s, e, m) = (stat(|s| s.stoi), stat(|s| s.estoi), stat(|s| s.mel_l1));
        Self {
            rows,
            mean: IntelligibilityScore {
                stoi: s.0,
                estoi: e.0,
                mel_l1: m.0,
            },
            std: IntelligibilityScore {
                stoi: s.1,
                estoi: e.1,
                mel_l1: m.1,
            },
        }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// `file,stoi,estoi,mel_l1`, one row per pair (NaN for failures), then
    /// `MEAN,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "file,stoi,estoi,mel_l1")?;
        for r in &self.rows {
            match &r.outcome {
                Ok(s) => writeln!(w, "{},{:.6},{:.6},{:.6}", r.file, s.stoi, s.estoi, s.mel_l1)?,
                Err(_) => writeln!(w, "{},nan,nan,nan", r.file)?,
            }
        }
        let m = &self.mean;
        writeln!(w, "MEAN,{:.6},{:.6},{:.6}", m.stoi, m.estoi, m.mel_l1)
    }
}

/// Scores `(name, reference wav, generated wav)` triples. Unreadable or
/// unscorable pairs become error rows; the batch continues.
pub fn evaluate_batch(pairs: &[(String, PathBuf, PathBuf)], features: &FeatureConfig) -> Result<BatchReport> {
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation batch".into()));
    }
    let score = |r: &Path, h: &Path| evaluate_pair(&load_wav(r)?, &load_wav(h)?, features);
    let rows = pairs
        .iter()
        .map(|(name, r, h)| EvalRow {
            file: name.clone(),
            outcome: score(r, h).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(BatchReport::from_rows(rows))
}
