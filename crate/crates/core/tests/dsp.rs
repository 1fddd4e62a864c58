use proptest::prelude::*;
use rand::Rng;
use vidspeech::dsp::{griffin_lim, invert_mel, istft, stft, FeatureConfig, StftConfig, Waveform, Window};
use vidspeech::metrics::resample;
use vidspeech::rng::rng_from;

fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[]);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn harmonic(sample_rate: u32, len: usize) -> Waveform {
    let samples = (0..len)
        .map(|n| {
            let t = n as f64 / sample_rate as f64;
            [220.0, 440.0, 660.0]
                .iter()
                .zip([1.0, 0.5, 0.25])
                .map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum::<f64>()
        })
        .collect();
    Waveform::new(samples, sample_rate).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn istft_inverts_stft_on_the_interior(
        frame_pow in 5u32..10,
        hop_div in prop::sample::select(vec![2usize, 4, 8]),
        pad in 0u32..2,
        frames in 2usize..12,
        extra in 0usize..64,
        seed in any::<u64>(),
    ) {
        let frame = 1usize << frame_pow;
        let hop = frame / hop_div;
        let cfg = StftConfig::new(frame, hop, frame << pad, Window::Hann).unwrap();
        let len = cfg.signal_length(frames) + extra;
        let x = noise(len, seed);
        let y = istft(&stft(&Waveform::new(x.clone(), 8000).unwrap(), &cfg).unwrap(), 8000).unwrap();
        for n in frame..y.samples.len().saturating_sub(frame) {
            prop_assert!((x[n] - y.samples[n]).abs() < 1e-10, "sample {n}");
        }
    }

    #[test]
    fn mel_features_are_finite_and_inversion_nonnegative(seed in any::<u64>(), gain in 0.0f64..4.0) {
        let cfg = FeatureConfig::synthetic();
        let fb = cfg.filterbank().unwrap();
        let x: Vec<f64> = noise(1600, seed).into_iter().map(|v| v * gain).collect();
        let mel = cfg.mel(&Waveform::new(x, cfg.sample_rate).unwrap(), &fb).unwrap();
        prop_assert!(mel.frames.as_slice().iter().all(|v| v.is_finite() && *v >= mel.log_floor.ln() - 1e-12));
        let mag = invert_mel(&mel, &fb).unwrap();
        prop_assert!(mag.as_slice().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn resampled_length_scales_with_rate(len in 1usize..4000, target in prop::sample::select(vec![8000u32, 10_000, 16_000, 22_050])) {
        let w = Waveform::new(noise(len, len as u64), 16_000).unwrap();
        let r = resample(&w, target).unwrap();
        let expected = (len as f64 * target as f64 / 16_000.0).round() as usize;
        prop_assert_eq!(r.len(), expected);
        prop_assert_eq!(r.sample_rate, target);
    }
}

#[test]
fn griffin_lim_reaches_tolerance_monotonically() {
    let cfg = StftConfig::default();
    let mag = stft(&harmonic(16_000, 8000), &cfg).unwrap().magnitude();
    let out = griffin_lim(&mag, &cfg, 60, 0).unwrap();
    assert_eq!(out.consistency.len(), 61);
    let last = *out.consistency.last().unwrap();
    assert!(last < 0.05, "final error {last}");
}

#[test]
fn griffin_lim_is_monotone_for_every_seed() {
    // The final error depends on the random start: about 87 of 100 seeds
    // end below 0.05 on this input. Monotonicity holds for all of them.
    let cfg = StftConfig::default();
    let mag = stft(&harmonic(16_000, 8000), &cfg).unwrap().magnitude();
    let mut below = 0;
    for seed in 0..20 {
        let out = griffin_lim(&mag, &cfg, 60, seed).unwrap();
        assert!(out.consistency.windows(2).all(|w| w[1] <= w[0]), "seed {seed}");
        below += usize::from(out.consistency[60] < 0.05);
    }
    assert!(below >= 15, "{below} of 20 seeds below 0.05");
}

#[test]
fn griffin_lim_on_synthetic_front_end() {
    let cfg = FeatureConfig::synthetic();
    let mag = stft(&harmonic(8000, 8000), &cfg.stft).unwrap().magnitude();
    let out = griffin_lim(&mag, &cfg.stft, 60, 1).unwrap();
    assert!(out.consistency.windows(2).all(|w| w[1] <= w[0]));
    assert!(out.consistency[60] < out.consistency[0]);
    assert!((out.samples.iter().map(|v| v.abs()).fold(0.0, f64::max) - 1.0).abs() < 1e-12 || out.samples.iter().all(|v| *v == 0.0));
}
