mod common;

use common::{l2, random_audio, random_clip, random_clips, randomized, sigmoid, toy_dims};
use proptest::prelude::*;
use rand::Rng;
use vidspeech::model::{
    audio_embed, decode_step, frame_encode, generate, generate_trace, kl_diag_gaussian, lstm_step, posterior_sequence,
    prior_sequence, reconstruct, reparameterize, sequence_noise, DiagGaussian, FrameClip, LstmState, ModelDims,
    ModelParams, LOG_VAR_CLAMP,
};
use vidspeech::rng::{rng_from, standard_normal_vec};
use vidspeech::Matrix;

fn set(p: &mut ModelParams, idx: usize, values: &[f64]) {
    assert_eq!(p.tensors[idx].len(), values.len(), "{}", p.tensors[idx].name);
    p.tensors[idx].data.copy_from_slice(values);
}

/// Gate arithmetic written out per unit: `[x; h]` against rows of a
/// `4H × (I+H)` matrix, gates ordered i, f, g, o.
fn lstm_by_hand(w: &[f64], b: &[f64], x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = h.len();
    let xh: Vec<f64> = x.iter().chain(h).copied().collect();
    let pre = |row: usize| b[row] + (0..xh.len()).map(|k| w[row * xh.len() + k] * xh[k]).sum::<f64>();
    let mut h_new = vec![0.0; hd];
    let mut c_new = vec![0.0; hd];
    for u in 0..hd {
        let i = sigmoid(pre(u));
        let f = sigmoid(pre(hd + u));
        let g = pre(2 * hd + u).tanh();
        let o = sigmoid(pre(3 * hd + u));
        c_new[u] = f * c[u] + i * g;
        h_new[u] = o * c_new[u].tanh();
    }
    (h_new, c_new)
}

#[test]
fn lstm_zero_weights_give_zero_state() {
    let state = LstmState {
        hidden: vec![0.3, -0.2, 0.9],
        cell: vec![0.0; 3],
    };
    let w = vec![0.0; 12 * 5];
    let next = lstm_step(&state, &[5.0, -7.0], &w, &[0.0; 12]).unwrap();
    assert_eq!(next.hidden, vec![0.0; 3]);
    assert_eq!(next.cell, vec![0.0; 3]);
}

#[test]
fn lstm_saturated_forget_gate_carries_cell() {
    let state = LstmState {
        hidden: vec![0.5, -0.5],
        cell: vec![1.7, -3.2],
    };
    let mut bias = vec![0.0; 8];
    bias[2..4].iter_mut().for_each(|b| *b = 20.0);
    let next = lstm_step(&state, &[0.4, 1.1, -2.0], &vec![0.0; 8 * 5], &bias).unwrap();
    for (a, b) in next.cell.iter().zip(&state.cell) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn lstm_two_unit_hand_evaluation() {
    let w: Vec<f64> = (0..8 * 4).map(|k| 0.37 * ((k as f64) * 0.71).sin() - 0.05).collect();
    let b = [0.1, -0.2, 1.0, 0.9, 0.05, -0.4, 0.3, 0.0];
    let (x, h, c) = ([0.8, -1.3], [0.25, -0.6], [0.4, -1.1]);
    let state = LstmState {
        hidden: h.to_vec(),
        cell: c.to_vec(),
    };
    let next = lstm_step(&state, &x, &w, &b).unwrap();
    let (he, ce) = lstm_by_hand(&w, &b, &x, &h, &c);
    for (a, e) in next.hidden.iter().zip(&he).chain(next.cell.iter().zip(&ce)) {
        assert!((a - e).abs() < 1e-12, "{a} vs {e}");
    }
}

#[test]
fn lstm_rejects_inconsistent_shapes() {
    let state = LstmState::zeros(2);
    assert!(lstm_step(&state, &[1.0], &[0.0; 8 * 3], &[0.0; 7]).is_err());
    assert!(lstm_step(&state, &[1.0], &[0.0; 8 * 2], &[0.0; 8]).is_err());
}

fn tiny_dims() -> ModelDims {
    ModelDims {
        audio_dim: 2,
        embed_dim: 2,
        hidden_dim: 2,
        head_hidden_dim: 2,
        latent_dim: 1,
        context_frames: 1,
        frame_height: 2,
        frame_width: 2,
        frame_channels: 1,
        conv_channels: vec![1],
    }
}

#[test]
fn audio_embed_zero_weights() {
    let p = ModelParams::zeros(toy_dims()).unwrap();
    assert_eq!(audio_embed(&p, &[1.0, -2.0, 3.0, 4.0]).unwrap(), vec![0.0; 4]);
}

#[test]
fn audio_embed_two_dim_hand_toy() {
    let mut p = ModelParams::zeros(tiny_dims()).unwrap();
    let l = p.layout.clone();
    set(&mut p, l.audio_embed[0].weight, &[1.0, 0.0, 0.0, -1.0]);
    set(&mut p, l.audio_embed[0].bias, &[0.5, 0.0]);
    set(&mut p, l.audio_embed[1].weight, &[2.0, 1.0, 0.0, 1.0]);
    set(&mut p, l.audio_embed[1].bias, &[0.0, 1.0]);
    set(&mut p, l.audio_embed[2].weight, &[1.0, -1.0, 0.5, 0.0]);
    // a = (1, 2): layer 0 gives relu(1.5, -2) = (1.5, 0); layer 1 gives
    // relu(3, 1); the linear output is (3 - 1, 1.5).
    assert_eq!(audio_embed(&p, &[1.0, 2.0]).unwrap(), vec![2.0, 1.5]);
    // a = (-1, -1): relu(-0.5, 1) = (0, 1); relu(1, 2); output (-1, 0.5).
    assert_eq!(audio_embed(&p, &[-1.0, -1.0]).unwrap(), vec![-1.0, 0.5]);
}

#[test]
fn audio_embed_finite_at_floor_extremes() {
    let dims = ModelDims::default();
    let p = ModelParams::init(dims.clone(), 3).unwrap();
    let floor = 1e-10f64.ln();
    for v in [floor, 0.0, -floor] {
        let e = audio_embed(&p, &vec![v; dims.audio_dim]).unwrap();
        assert_eq!(e.len(), dims.embed_dim);
        assert!(e.iter().all(|x| x.is_finite()));
    }
    assert!(audio_embed(&p, &[0.0; 3]).is_err());
}

#[test]
fn zero_heads_give_standard_normal() {
    let dims = toy_dims();
    let p = ModelParams::zeros(dims.clone()).unwrap();
    let post = posterior_sequence(&p, &random_audio(&dims, 3, 1)).unwrap();
    let prior = prior_sequence(&p, &random_clips(&dims, 3, 1)).unwrap();
    for g in post.iter().chain(&prior) {
        assert_eq!(g, &DiagGaussian::standard(dims.latent_dim));
    }
}

#[test]
fn head_pre_activation_is_clamped() {
    let dims = toy_dims();
    let mut p = ModelParams::zeros(dims.clone()).unwrap();
    let l = p.layout.clone();
    set(&mut p, l.posterior_logvar[1].bias, &[50.0, -50.0, 3.0, 50.0]);
    set(&mut p, l.prior_logvar[1].bias, &[50.0; 4]);
    let post = posterior_sequence(&p, &random_audio(&dims, 2, 1)).unwrap();
    assert_eq!(post[0].log_var, vec![LOG_VAR_CLAMP, -LOG_VAR_CLAMP, 3.0, LOG_VAR_CLAMP]);
    let prior = prior_sequence(&p, &random_clips(&dims, 1, 1)).unwrap();
    assert_eq!(prior[0].log_var, vec![14.0; 4]);
}

#[test]
fn frame_encode_zero_weights() {
    let dims = toy_dims();
    let p = ModelParams::zeros(dims.clone()).unwrap();
    assert_eq!(frame_encode(&p, &random_clip(&dims, 1, 0)).unwrap(), vec![0.0; dims.embed_dim]);
}

/// Gaussian blob, broad relative to the 2-pixel pooling stride. The
/// encoder has no global pooling, so narrow patterns move further.
fn blob_clip(dims: &ModelDims, cy: f64, cx: f64) -> FrameClip {
    let sigma = 12.0;
    let frame: Vec<f64> = (0..dims.frame_height * dims.frame_width)
        .map(|i| {
            let (y, x) = ((i / dims.frame_width) as f64, (i % dims.frame_width) as f64);
            (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    FrameClip {
        pixels: frame.repeat(dims.context_frames),
        context_frames: dims.context_frames,
        height: dims.frame_height,
        width: dims.frame_width,
        channels: 1,
        center_index: 0,
    }
}

#[test]
fn frame_encode_tolerates_one_pooling_stride() {
    let dims = ModelDims::default();
    let p = ModelParams::init(dims.clone(), 7).unwrap();
    let base = frame_encode(&p, &blob_clip(&dims, 15.5, 15.5)).unwrap();
    let norm = l2(&base, &vec![0.0; base.len()]);
    for (dy, dx) in [(2.0, 0.0), (0.0, 2.0), (-2.0, 0.0), (0.0, -2.0)] {
        let moved = frame_encode(&p, &blob_clip(&dims, 15.5 + dy, 15.5 + dx)).unwrap();
        let rel = l2(&base, &moved) / norm;
        assert!(rel < 0.1, "shift ({dy}, {dx}) changed the feature by {rel}");
    }
}

#[test]
fn frame_encode_finite_for_all_ones_and_checks_shape() {
    let dims = ModelDims::default();
    let p = ModelParams::init(dims.clone(), 2).unwrap();
    let mut clip = blob_clip(&dims, 0.0, 0.0);
    clip.pixels.iter_mut().for_each(|v| *v = 1.0);
    let f = frame_encode(&p, &clip).unwrap();
    assert_eq!(f.len(), dims.embed_dim);
    assert!(f.iter().all(|v| v.is_finite()));
    clip.pixels.pop();
    assert!(frame_encode(&p, &clip).is_err());
}

#[test]
fn prior_is_causal_and_deterministic() {
    let dims = toy_dims();
    let p = randomized(dims.clone(), 11, 0.5);
    let clips = random_clips(&dims, 6, 1);
    let full = prior_sequence(&p, &clips).unwrap();
    assert_eq!(full, prior_sequence(&p, &clips).unwrap());
    for t in 0..clips.len() {
        let mut perturbed = clips.clone();
        for c in &mut perturbed[t + 1..] {
            c.pixels.iter_mut().for_each(|v| *v = 1.0 - *v);
        }
        let out = prior_sequence(&p, &perturbed).unwrap();
        assert_eq!(out[..=t], full[..=t], "prefix up to {t} changed");
        if t + 1 < clips.len() {
            assert_ne!(out[t + 1], full[t + 1]);
        }
    }
}

#[test]
fn posterior_is_causal() {
    let dims = toy_dims();
    let p = randomized(dims.clone(), 12, 0.5);
    let audio = random_audio(&dims, 5, 2);
    let full = posterior_sequence(&p, &audio).unwrap();
    let mut perturbed = audio.clone();
    perturbed.row_mut(3).iter_mut().for_each(|v| *v += 1.0);
    let out = posterior_sequence(&p, &perturbed).unwrap();
    assert_eq!(out[..3], full[..3]);
    assert_ne!(out[3], full[3]);
}

#[test]
fn decode_step_zero_weights() {
    let p = ModelParams::zeros(toy_dims()).unwrap();
    let (state, a) = decode_step(&p, &LstmState::zeros(8), &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(a, vec![0.0; 4]);
    assert_eq!(state, LstmState::zeros(8));
}

#[test]
fn decode_step_hidden_two_hand_evaluation() {
    let mut p = ModelParams::zeros(tiny_dims()).unwrap();
    let l = p.layout.clone();
    let w: Vec<f64> = (0..8 * 3).map(|k| 0.3 * ((k as f64) * 1.3).cos()).collect();
    let b = [0.1, -0.1, 0.5, 0.7, 0.0, 0.2, -0.3, 0.4];
    set(&mut p, l.decoder_lstm.weight, &w);
    set(&mut p, l.decoder_lstm.bias, &b);
    let mlp = [
        ([1.5, -0.5, 0.25, 2.0], [0.1, 0.0]),
        ([-1.0, 0.5, 1.0, 1.0], [0.2, -0.1]),
        ([0.7, -0.3, 0.2, 0.9], [-0.5, 0.25]),
    ];
    for (id, (mw, mb)) in l.audio_decoder.iter().zip(&mlp) {
        set(&mut p, id.weight, mw);
        set(&mut p, id.bias, mb);
    }
    let state = LstmState {
        hidden: vec![0.2, -0.4],
        cell: vec![0.6, 0.1],
    };
    let z = [0.9];
    let (next, out) = decode_step(&p, &state, &z).unwrap();

    let (h, c) = lstm_by_hand(&w, &b, &z, &state.hidden, &state.cell);
    let mut x = h.clone();
    for (k, (mw, mb)) in mlp.iter().enumerate() {
        let y: Vec<f64> = (0..2).map(|r| mb[r] + mw[2 * r] * x[0] + mw[2 * r + 1] * x[1]).collect();
        x = if k < 2 { y.iter().map(|v| v.max(0.0)).collect() } else { y };
    }
    for (a, e) in next.hidden.iter().zip(&h).chain(next.cell.iter().zip(&c)).chain(out.iter().zip(&x)) {
        assert!((a - e).abs() < 1e-12, "{a} vs {e}");
    }
}

#[test]
fn decode_sequence_is_deterministic() {
    let dims = toy_dims();
    let p = randomized(dims.clone(), 4, 0.5);
    let zs = sequence_noise(9, 5, dims.latent_dim);
    let run = || {
        let mut s = LstmState::zeros(dims.hidden_dim);
        zs.iter()
            .map(|z| {
                let (n, a) = decode_step(&p, &s, z).unwrap();
                s = n;
                a
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn generate_single_step_is_prior_then_decode() {
    let dims = toy_dims();
    let p = randomized(dims.clone(), 5, 0.5);
    let clips = random_clips(&dims, 1, 3);
    let out = generate(&p, &clips, 42).unwrap();
    let prior = &prior_sequence(&p, &clips).unwrap()[0];
    let eps = &sequence_noise(42, 1, dims.latent_dim)[0];
    let z = reparameterize(prior, eps).unwrap();
    let (_, a) = decode_step(&p, &LstmState::zeros(dims.hidden_dim), &z.z).unwrap();
    assert_eq!(out.shape(), (1, dims.audio_dim));
    for (x, y) in out.row(0).iter().zip(&a) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn generate_seeds_and_shape() {
    let dims = toy_dims();
    let p = randomized(dims.clone(), 6, 0.5);
    for n in [1, 4, 9] {
        let clips = random_clips(&dims, n, 1);
        let a = generate(&p, &clips, 1).unwrap();
        assert_eq!(a.shape(), (n, dims.audio_dim));
        assert_eq!(a, generate(&p, &clips, 1).unwrap());
        let b = generate(&p, &clips, 2).unwrap();
        assert!(l2(a.as_slice(), b.as_slice()) > 0.0);
    }
    assert!(generate(&p, &[], 1).is_err());
}

#[test]
fn near_deterministic_prior_makes_seeds_agree() {
    let dims = toy_dims();
    let mut p = randomized(dims.clone(), 8, 0.5);
    let l = p.layout.clone();
    let n = p.tensors[l.prior_logvar[1].weight].len();
    set(&mut p, l.prior_logvar[1].weight, &vec![0.0; n]);
    set(&mut p, l.prior_logvar[1].bias, &[-100.0; 4]);
    let clips = random_clips(&dims, 6, 2);
    let trace = generate_trace(&p, &clips, 1).unwrap();
    assert!(trace.priors.iter().all(|g| g.log_var == vec![-LOG_VAR_CLAMP; 4]));
    for seed in 2..6 {
        let other = generate(&p, &clips, seed).unwrap();
        let diff = trace
            .audio
            .as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-3, "seed {seed}: {diff}");
    }
}

#[test]
fn reconstruct_zero_model_and_determinism() {
    let dims = toy_dims();
    let audio = random_audio(&dims, 5, 3);
    let zero = ModelParams::zeros(dims.clone()).unwrap();
    assert_eq!(reconstruct(&zero, &audio, 1).unwrap(), Matrix::zeros(5, dims.audio_dim));
    let p = randomized(dims.clone(), 9, 0.5);
    let r = reconstruct(&p, &audio, 3).unwrap();
    assert_eq!(r, reconstruct(&p, &audio, 3).unwrap());
    assert_eq!(r.shape(), audio.shape());
    assert!(reconstruct(&p, &Matrix::zeros(0, dims.audio_dim), 3).is_err());
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = rng_from(2024, &[]);
    let mut gauss = || {
        DiagGaussian::new(
            (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    };
    let (q, p) = (gauss(), gauss());
    let closed = kl_diag_gaussian(&q, &p).unwrap();
    let n = 1_000_000;
    let mut noise_rng = rng_from(7, &[]);
    let mut acc = 0.0;
    for _ in 0..n {
        let z = reparameterize(&q, &standard_normal_vec(&mut noise_rng, 8)).unwrap().z;
        acc += q.log_density(&z) - p.log_density(&z);
    }
    let mc = acc / n as f64;
    assert!((mc - closed).abs() / closed < 0.01, "closed {closed}, monte carlo {mc}");
}

fn gaussian_strategy(dim: usize) -> impl Strategy<Value = DiagGaussian> {
    (
        proptest::collection::vec(-5.0..5.0f64, dim),
        proptest::collection::vec(-LOG_VAR_CLAMP..LOG_VAR_CLAMP, dim),
    )
        .prop_map(|(m, v)| DiagGaussian::new(m, v).unwrap())
}

proptest! {
    #[test]
    fn kl_is_nonnegative_and_zero_on_self(q in gaussian_strategy(6), p in gaussian_strategy(6)) {
        prop_assert!(kl_diag_gaussian(&q, &p).unwrap() >= 0.0);
        prop_assert!(kl_diag_gaussian(&q, &q).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn zero_noise_returns_mean(g in gaussian_strategy(5)) {
        prop_assert_eq!(reparameterize(&g, &[0.0; 5]).unwrap().z, g.mean.clone());
    }

    #[test]
    fn unit_variance_noise_is_added(g in gaussian_strategy(3), k in 0usize..3) {
        let g = DiagGaussian::new(g.mean, vec![0.0; 3]).unwrap();
        let mut e = vec![0.0; 3];
        e[k] = 1.0;
        let z = reparameterize(&g, &e).unwrap().z;
        for d in 0..3 {
            let expect = g.mean[d] + if d == k { 1.0 } else { 0.0 };
            prop_assert!((z[d] - expect).abs() < 1e-15);
        }
    }
}
