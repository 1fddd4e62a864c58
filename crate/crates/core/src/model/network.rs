//! Forward computations of the sequence model, expressed on a [`Tape`] so the
//! same code serves inference and training.

use super::gaussian::{DiagGaussian, LOG_VAR_CLAMP};
use super::params::{LinearId, ModelParams};
use crate::rng::{rng_from, standard_normal_vec};
use crate::tape::{ConvShape, Tape, Var};
use crate::{Error, Matrix, Result};

/// `K` consecutive frames centred on `center_index`, stacked along channels:
/// `pixels` is `(K·C) × H × W`, frame-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameClip {
    pub pixels: Vec<f64>,
    pub context_frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub center_index: usize,
}

impl FrameClip {
    pub fn frame(&self, k: usize) -> &[f64] {
        let n = self.channels * self.height * self.width;
        &self.pixels[k * n..(k + 1) * n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }
}

/// Model tensors registered as tape leaves.
pub(crate) struct Bound {
    pub vars: Vec<Var>,
}

impl Bound {
    pub fn new(tape: &mut Tape, params: &ModelParams) -> Self {
        Self {
            vars: params.tensors.iter().map(|t| tape.leaf(t.data.clone())).collect(),
        }
    }

    fn linear(&self, tape: &mut Tape, id: LinearId, x: Var) -> Var {
        tape.linear(self.vars[id.weight], self.vars[id.bias], x)
    }

    /// Affine layers with ReLU between them and a linear output.
    fn mlp(&self, tape: &mut Tape, ids: &[LinearId], x: Var) -> Var {
        let mut h = x;
        for (i, id) in ids.iter().enumerate() {
            h = self.linear(tape, *id, h);
            if i + 1 < ids.len() {
                h = tape.relu(h);
            }
        }
        h
    }

    fn gaussian_head(&self, tape: &mut Tape, mean: &[LinearId; 2], logvar: &[LinearId; 2], h: Var) -> (Var, Var) {
        let mu = self.mlp(tape, mean, h);
        let lv = self.mlp(tape, logvar, h);
        let lv = tape.clamp(lv, -LOG_VAR_CLAMP, LOG_VAR_CLAMP);
        (mu, lv)
    }
}

/// Gates ordered input, forget, candidate, output; weight is
/// `4H × (I + H)` acting on `[x; h]`.
pub(crate) fn lstm_cell(tape: &mut Tape, w: Var, b: Var, x: Var, h: Var, c: Var) -> (Var, Var) {
    let hd = tape.value(h).len();
    let xh = tape.concat(&[x, h]);
    let gates = tape.linear(w, b, xh);
    let i = tape.slice(gates, 0, hd);
    let f = tape.slice(gates, hd, hd);
    let g = tape.slice(gates, 2 * hd, hd);
    let o = tape.slice(gates, 3 * hd, hd);
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c);
    let write = tape.mul(i, g);
    let c_new = tape.add(keep, write);
    let squashed = tape.tanh(c_new);
    let h_new = tape.mul(o, squashed);
    (h_new, c_new)
}

struct Recurrent {
    h: Var,
    c: Var,
}

impl Recurrent {
    fn zeros(tape: &mut Tape, dim: usize) -> Self {
        Self {
            h: tape.leaf(vec![0.0; dim]),
            c: tape.leaf(vec![0.0; dim]),
        }
    }

    fn step(&mut self, tape: &mut Tape, bound: &Bound, id: LinearId, x: Var) -> Var {
        let (h, c) = lstm_cell(tape, bound.vars[id.weight], bound.vars[id.bias], x, self.h, self.c);
        self.h = h;
        self.c = c;
        h
    }
}

/// One time step of every stream, built on a shared tape.
pub(crate) struct Unrolled<'p> {
    params: &'p ModelParams,
    bound: Bound,
    audio_state: Recurrent,
    frame_state: Recurrent,
    decoder_state: Recurrent,
}

impl<'p> Unrolled<'p> {
    pub fn new(tape: &mut Tape, params: &'p ModelParams) -> Self {
        let hd = params.dims.hidden_dim;
        Self {
            params,
            bound: Bound::new(tape, params),
            audio_state: Recurrent::zeros(tape, hd),
            frame_state: Recurrent::zeros(tape, hd),
            decoder_state: Recurrent::zeros(tape, hd),
        }
    }

    pub fn param_vars(&self) -> &[Var] {
        &self.bound.vars
    }

    pub fn audio_embed(&self, tape: &mut Tape, a: Var) -> Var {
        self.bound.mlp(tape, &self.params.layout.audio_embed, a)
    }

    /// Audio LSTM step followed by the posterior heads.
    pub fn posterior(&mut self, tape: &mut Tape, a: Var) -> (Var, Var) {
        let e = self.audio_embed(tape, a);
        let l = &self.params.layout;
        let h = self.audio_state.step(tape, &self.bound, l.audio_lstm, e);
        self.bound.gaussian_head(tape, &l.posterior_mean, &l.posterior_logvar, h)
    }

    pub fn frame_features(&self, tape: &mut Tape, clip: Var) -> Var {
        let d = &self.params.dims;
        let l = &self.params.layout;
        let (mut h, mut w, mut c) = (d.frame_height, d.frame_width, d.clip_channels());
        let mut x = clip;
        for (id, &c_out) in l.frame_conv.iter().zip(&d.conv_channels) {
            let shape = ConvShape {
                in_channels: c,
                out_channels: c_out,
                height: h,
                width: w,
            };
            x = tape.conv3x3(x, self.bound.vars[id.weight], self.bound.vars[id.bias], shape);
            x = tape.relu(x);
            x = tape.max_pool2(x, c_out, h, w);
            h /= 2;
            w /= 2;
            c = c_out;
        }
        self.bound.linear(tape, l.frame_fc, x)
    }

    /// Frame LSTM step followed by the prior heads.
    pub fn prior(&mut self, tape: &mut Tape, clip: Var) -> (Var, Var) {
        let e = self.frame_features(tape, clip);
        let l = &self.params.layout;
        let h = self.frame_state.step(tape, &self.bound, l.frame_lstm, e);
        self.bound.gaussian_head(tape, &l.prior_mean, &l.prior_logvar, h)
    }

    pub fn sample(&self, tape: &mut Tape, mean: Var, log_var: Var, noise: Vec<f64>) -> Var {
        let half = tape.scale(log_var, 0.5);
        let sd = tape.exp(half);
        let scaled = tape.mul_const(sd, noise);
        tape.add(mean, scaled)
    }

    /// Decoder LSTM step followed by the mirrored audio MLP.
    pub fn decode(&mut self, tape: &mut Tape, z: Var) -> Var {
        let l = &self.params.layout;
        let h = self.decoder_state.step(tape, &self.bound, l.decoder_lstm, z);
        self.bound.mlp(tape, &l.audio_decoder, h)
    }
}

fn check_clip(params: &ModelParams, clip: &FrameClip) -> Result<()> {
    let d = &params.dims;
    if clip.context_frames != d.context_frames
        || clip.height != d.frame_height
        || clip.width != d.frame_width
        || clip.channels != d.frame_channels
        || clip.pixels.len() != d.clip_len()
    {
        return Err(Error::DimensionMismatch(format!(
            "clip is {}x{}x{}x{}, model expects {}x{}x{}x{}",
            clip.context_frames,
            clip.height,
            clip.width,
            clip.channels,
            d.context_frames,
            d.frame_height,
            d.frame_width,
            d.frame_channels
        )));
    }
    Ok(())
}

fn check_audio(params: &ModelParams, len: usize) -> Result<()> {
    if len != params.dims.audio_dim {
        return Err(Error::DimensionMismatch(format!(
            "audio frame has {len} values, model expects {}",
            params.dims.audio_dim
        )));
    }
    Ok(())
}

/// Per-step standard-normal noise for a sequence of length `n`.
pub fn sequence_noise(seed: u64, n: usize, latent_dim: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed, &[0x2a]);
    (0..n).map(|_| standard_normal_vec(&mut rng, latent_dim)).collect()
}

/// `e_a = φ(a_t)`: the three-layer audio embedding.
pub fn audio_embed(params: &ModelParams, a: &[f64]) -> Result<Vec<f64>> {
    check_audio(params, a.len())?;
    let mut tape = Tape::new();
    let net = Unrolled::new(&mut tape, params);
    let x = tape.leaf(a.to_vec());
    let e = net.audio_embed(&mut tape, x);
    Ok(tape.value(e).to_vec())
}

/// One LSTM step with explicit weights (`4H × (I+H)`) and bias (`4H`).
pub fn lstm_step(state: &LstmState, input: &[f64], weight: &[f64], bias: &[f64]) -> Result<LstmState> {
    let hd = state.hidden.len();
    if state.cell.len() != hd || bias.len() != 4 * hd || weight.len() != 4 * hd * (input.len() + hd) {
        return Err(Error::DimensionMismatch(format!(
            "LSTM with hidden {hd}, input {}: weight {} and bias {} values",
            input.len(),
            weight.len(),
            bias.len()
        )));
    }
    let mut tape = Tape::new();
    let w = tape.leaf(weight.to_vec());
    let b = tape.leaf(bias.to_vec());
    let x = tape.leaf(input.to_vec());
    let h = tape.leaf(state.hidden.clone());
    let c = tape.leaf(state.cell.clone());
    let (h, c) = lstm_cell(&mut tape, w, b, x, h, c);
    Ok(LstmState {
        hidden: tape.value(h).to_vec(),
        cell: tape.value(c).to_vec(),
    })
}

/// Compact convolutional encoding of one clip.
pub fn frame_encode(params: &ModelParams, clip: &FrameClip) -> Result<Vec<f64>> {
    check_clip(params, clip)?;
    let mut tape = Tape::new();
    let net = Unrolled::new(&mut tape, params);
    let x = tape.leaf(clip.pixels.clone());
    let f = net.frame_features(&mut tape, x);
    Ok(tape.value(f).to_vec())
}

fn gaussian(tape: &Tape, mean: Var, lv: Var) -> DiagGaussian {
    DiagGaussian {
        mean: tape.value(mean).to_vec(),
        log_var: tape.value(lv).to_vec(),
    }
}

/// `q(z | a_t)` for every step of an audio stream (`N × audio_dim`).
pub fn posterior_sequence(params: &ModelParams, audio: &Matrix) -> Result<Vec<DiagGaussian>> {
    check_audio(params, audio.cols())?;
    let mut tape = Tape::new();
    let mut net = Unrolled::new(&mut tape, params);
    Ok(audio
        .iter_rows()
        .map(|a| {
            let x = tape.leaf(a.to_vec());
            let (m, lv) = net.posterior(&mut tape, x);
            gaussian(&tape, m, lv)
        })
        .collect())
}

/// `q(z | f_t)` for every clip of a frame stream.
pub fn prior_sequence(params: &ModelParams, clips: &[FrameClip]) -> Result<Vec<DiagGaussian>> {
    clips.iter().try_for_each(|c| check_clip(params, c))?;
    let mut tape = Tape::new();
    let mut net = Unrolled::new(&mut tape, params);
    Ok(clips
        .iter()
        .map(|clip| {
            let x = tape.leaf(clip.pixels.clone());
            let (m, lv) = net.prior(&mut tape, x);
            gaussian(&tape, m, lv)
        })
        .collect())
}

/// Decoder LSTM step plus mirrored MLP: returns the new state and one
/// predicted audio frame.
pub fn decode_step(params: &ModelParams, state: &LstmState, z: &[f64]) -> Result<(LstmState, Vec<f64>)> {
    if z.len() != params.dims.latent_dim || state.hidden.len() != params.dims.hidden_dim {
        return Err(Error::DimensionMismatch(format!(
            "decode step with latent {} and state {}, model expects {} and {}",
            z.len(),
            state.hidden.len(),
            params.dims.latent_dim,
            params.dims.hidden_dim
        )));
    }
    let mut tape = Tape::new();
    let mut net = Unrolled::new(&mut tape, params);
    net.decoder_state = Recurrent {
        h: tape.leaf(state.hidden.clone()),
        c: tape.leaf(state.cell.clone()),
    };
    let zv = tape.leaf(z.to_vec());
    let out = net.decode(&mut tape, zv);
    let next = LstmState {
        hidden: tape.value(net.decoder_state.h).to_vec(),
        cell: tape.value(net.decoder_state.c).to_vec(),
    };
    Ok((next, tape.value(out).to_vec()))
}

/// Test-time path with its intermediate quantities.
#[derive(Clone, Debug)]
pub struct Generation {
    /// `N × audio_dim` predicted features.
    pub audio: Matrix,
    pub priors: Vec<DiagGaussian>,
    pub latents: Vec<Vec<f64>>,
}

/// Draws `z_t ~ q(z | f_t)` with seeded noise and decodes, one step per clip.
pub fn generate_trace(params: &ModelParams, clips: &[FrameClip], seed: u64) -> Result<Generation> {
    if clips.is_empty() {
        return Err(Error::Empty("frame stream".into()));
    }
    clips.iter().try_for_each(|c| check_clip(params, c))?;
    let noise = sequence_noise(seed, clips.len(), params.dims.latent_dim);
    let mut tape = Tape::new();
    let mut net = Unrolled::new(&mut tape, params);
    let mut rows = Vec::with_capacity(clips.len());
    let mut priors = Vec::with_capacity(clips.len());
    let mut latents = Vec::with_capacity(clips.len());
    for (clip, eps) in clips.iter().zip(noise) {
        let x = tape.leaf(clip.pixels.clone());
        let (m, lv) = net.prior(&mut tape, x);
        priors.push(gaussian(&tape, m, lv));
        let z = net.sample(&mut tape, m, lv, eps);
        latents.push(tape.value(z).to_vec());
        let a = net.decode(&mut tape, z);
        rows.push(tape.value(a).to_vec());
    }
    Ok(Generation {
        audio: Matrix::from_rows(&rows)?,
        priors,
        latents,
    })
}

pub fn generate(params: &ModelParams, clips: &[FrameClip], seed: u64) -> Result<Matrix> {
    Ok(generate_trace(params, clips, seed)?.audio)
}

/// Training-mode path: sample from `q(z | a_t)` and decode.
pub fn reconstruct(params: &ModelParams, audio: &Matrix, seed: u64) -> Result<Matrix> {
    if audio.rows() == 0 {
        return Err(Error::Empty("audio stream".into()));
    }
    check_audio(params, audio.cols())?;
    let noise = sequence_noise(seed, audio.rows(), params.dims.latent_dim);
    let mut tape = Tape::new();
    let mut net = Unrolled::new(&mut tape, params);
    let mut rows = Vec::with_capacity(audio.rows());
    for (a, eps) in audio.iter_rows().zip(noise) {
        let x = tape.leaf(a.to_vec());
        let (m, lv) = net.posterior(&mut tape, x);
        let z = net.sample(&mut tape, m, lv, eps);
        let out = net.decode(&mut tape, z);
        rows.push(tape.value(out).to_vec());
    }
    Matrix::from_rows(&rows)
}

/// Scalar nodes of one sequence's objective: `Σ_t ½‖a_t − â_t‖²` and
/// `Σ_t KL(q(z|a_t) ‖ q(z|f_t))`.
pub(crate) struct SequenceTerms {
    pub sq_err: Var,
    pub kl: Var,
}

pub(crate) fn unroll_training(
    tape: &mut Tape,
    net: &mut Unrolled<'_>,
    clips: &[FrameClip],
    audio: &Matrix,
    noise: Vec<Vec<f64>>,
) -> SequenceTerms {
    let mut errs = Vec::with_capacity(clips.len());
    let mut kls = Vec::with_capacity(clips.len());
    for ((clip, a), eps) in clips.iter().zip(audio.iter_rows()).zip(noise) {
        let av = tape.leaf(a.to_vec());
        let (mq, lq) = net.posterior(tape, av);
        let fv = tape.leaf(clip.pixels.clone());
        let (mp, lp) = net.prior(tape, fv);
        let z = net.sample(tape, mq, lq, eps);
        let pred = net.decode(tape, z);
        errs.push((tape.half_sq_err(pred, a), 1.0));
        kls.push((tape.kl_diag(mq, lq, mp, lp), 1.0));
    }
    SequenceTerms {
        sq_err: tape.weighted_sum(&errs),
        kl: tape.weighted_sum(&kls),
    }
}

pub(crate) fn check_sequence(params: &ModelParams, clips: &[FrameClip], audio: &Matrix) -> Result<()> {
    if clips.len() != audio.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} frame clips but {} audio frames",
            clips.len(),
            audio.rows()
        )));
    }
    if clips.is_empty() {
        return Err(Error::Empty("sequence".into()));
    }
    check_audio(params, audio.cols())?;
    clips.iter().try_for_each(|c| check_clip(params, c))
}
