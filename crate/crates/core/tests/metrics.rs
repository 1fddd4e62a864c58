mod common;

use common::{speech_like, with_noise};
use vidspeech::dataio::save_wav;
use vidspeech::dsp::{FeatureConfig, Waveform};
use vidspeech::metrics::{estoi, evaluate_batch, resample, stoi};
use vidspeech::rng::{rng_from, standard_normal_vec};
use vidspeech::Error;

fn scaled(w: &Waveform, c: f64) -> Waveform {
    Waveform::new(w.samples.iter().map(|v| v * c).collect(), w.sample_rate).unwrap()
}

#[test]
fn identical_inputs_score_exactly_one() {
    for sr in [10_000, 16_000] {
        let x = speech_like(sr, 2.0);
        assert_eq!(stoi(&x, &x).unwrap(), 1.0);
        assert_eq!(estoi(&x, &x).unwrap(), 1.0);
    }
}

#[test]
fn scores_are_invariant_to_degraded_gain() {
    let x = speech_like(16_000, 2.0);
    let y = with_noise(&x, 5.0, 1);
    let (s, e) = (stoi(&x, &y).unwrap(), estoi(&x, &y).unwrap());
    for c in [0.01, 0.5, 3.0, 250.0] {
        let yc = scaled(&y, c);
        assert!((stoi(&x, &yc).unwrap() - s).abs() < 1e-9);
        assert!((estoi(&x, &yc).unwrap() - e).abs() < 1e-9);
    }
}

#[test]
fn independent_noise_scores_low() {
    let x = speech_like(16_000, 3.0);
    let mut rng = rng_from(5, &[]);
    let noise = Waveform::new(standard_normal_vec(&mut rng, x.len()), x.sample_rate).unwrap();
    let s = stoi(&x, &noise).unwrap();
    assert!(s < 0.2, "stoi against white noise {s}");
    assert!(estoi(&x, &noise).unwrap() < 0.2);
}

#[test]
fn noisier_inputs_score_lower() {
    let x = speech_like(16_000, 3.0);
    let scores: Vec<(f64, f64)> = [20.0, 10.0, 0.0]
        .iter()
        .map(|&snr| {
            let y = with_noise(&x, snr, 3);
            (stoi(&x, &y).unwrap(), estoi(&x, &y).unwrap())
        })
        .collect();
    for w in scores.windows(2) {
        assert!(w[0].0 > w[1].0 && w[0].1 > w[1].1, "{scores:?}");
    }
    for (s, e) in &scores {
        assert!((-1.0..=1.0).contains(s) && (-1.0..=1.0).contains(e));
    }
}

#[test]
fn unequal_or_short_inputs_are_errors() {
    let x = speech_like(10_000, 1.0);
    let short = Waveform::new(x.samples[..3000].to_vec(), 10_000).unwrap();
    assert!(matches!(stoi(&short, &short), Err(Error::InsufficientDuration { .. })));
    assert!(stoi(&x, &short).is_err());
    assert!(estoi(&x, &resample(&x, 16_000).unwrap()).is_err());
}

#[test]
fn batch_of_identical_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut pairs = Vec::new();
    for (i, secs) in [1.5, 2.0, 1.0].iter().enumerate() {
        let name = format!("utt{}.wav", 2 - i);
        let path = dir.path().join(&name);
        save_wav(&speech_like(16_000, *secs), &path).unwrap();
        pairs.push((name, path.clone(), path));
    }
    let report = evaluate_batch(&pairs, &FeatureConfig::default()).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(report.failures(), 0);
    let names: Vec<_> = report.rows.iter().map(|r| r.file.as_str()).collect();
    assert_eq!(names, ["utt0.wav", "utt1.wav", "utt2.wav"]);
    assert_eq!((report.mean.stoi, report.mean.estoi, report.mean.mel_l1), (1.0, 1.0, 0.0));

    let mut reversed = pairs.clone();
    reversed.reverse();
    assert_eq!(evaluate_batch(&reversed, &FeatureConfig::default()).unwrap(), report);
}

#[test]
fn single_pair_mean_is_the_score_and_failures_continue() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("r.wav"), dir.path().join("h.wav"));
    let x = speech_like(16_000, 1.5);
    save_wav(&x, &r).unwrap();
    save_wav(&with_noise(&x, 5.0, 2), &h).unwrap();
    let one = evaluate_batch(&[("a".into(), r.clone(), h.clone())], &FeatureConfig::default()).unwrap();
    assert_eq!(one.mean, *one.rows[0].outcome.as_ref().unwrap());
    assert_eq!((one.std.stoi, one.std.estoi, one.std.mel_l1), (0.0, 0.0, 0.0));

    let missing = dir.path().join("missing.wav");
    let two = evaluate_batch(
        &[("a".into(), r, h), ("b".into(), missing.clone(), missing)],
        &FeatureConfig::default(),
    )
    .unwrap();
    assert_eq!(two.rows.len(), 2);
    assert_eq!(two.failures(), 1);
    assert_eq!(two.mean, one.mean);
    let mut csv = Vec::new();
    two.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("file,stoi,estoi,mel_l1\n"));
    assert!(text.contains("b,nan,nan,nan"));
    assert!(text.trim_end().lines().last().unwrap().starts_with("MEAN,"));
}
