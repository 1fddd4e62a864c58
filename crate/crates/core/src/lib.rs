//! Stochastic speech prediction from silent video.
//!
//! A conditional-prior sequence VAE learns the distribution of mel features
//! given a stream of lip-region context clips. At training time an audio
//! encoder produces a per-step posterior `q(z | a_t)` and a frame encoder
//! produces the learned prior `q(z | f_t)`; at test time latents are drawn
//! from the frame-conditioned distribution and decoded to mel frames, which
//! are turned back into a waveform with Griffin-Lim.
//!
//! Modules:
//! - [`dsp`]: STFT/ISTFT, mel filterbank, mel inversion, Griffin-Lim.
//! - [`model`]: the network, its parameters and checkpoints.
//! - [`training`]: the objective, its gradient, gradient checking, Adam.
//! - [`metrics`]: STOI, ESTOI, mel L1 and batch reports.
//! - [`dataio`]: WAV I/O, context clips, stream alignment, synthetic data.

pub mod dataio;
pub mod dsp;
mod error;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tape;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
