//! The conditional-prior sequence VAE.
//!
//! Audio stream: 3-layer MLP embedding, LSTM, then two single-hidden-layer
//! heads giving the posterior `q(z | a_t)`. Frame stream: stacked-channel
//! context clip, three conv/pool blocks and a dense layer, LSTM, then the
//! prior heads `q(z | f_t)`. Decoder: LSTM over `z_t` followed by an MLP that
//! mirrors the audio embedding.

mod checkpoint;
mod gaussian;
mod network;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use gaussian::{kl_diag_gaussian, reparameterize, DiagGaussian, LatentSample, LOG_VAR_CLAMP};
pub(crate) use gaussian::kl_divergence_parts;
pub use network::{
    audio_embed, decode_step, frame_encode, generate, generate_trace, lstm_step, posterior_sequence,
    prior_sequence, reconstruct, sequence_noise, FrameClip, Generation, LstmState,
};
pub(crate) use network::{check_sequence, unroll_training, Unrolled};
pub use params::{Layout, LinearId, ModelDims, ModelParams, Tensor};
