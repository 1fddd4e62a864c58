//! The sequence lower bound, its exact gradient, a finite-difference harness
//! and the Adam training loop.

mod config;
mod gradcheck;
mod objective;
mod optim;

pub use config::TrainConfig;
pub use gradcheck::{finite_difference, grad_check, relative_error, GradReport, TensorGradError};
pub use objective::{backward, elbo, example_seed, ElboBreakdown};
pub use optim::{clip_global_norm, global_norm, Adam};

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::dataio::PairedSequence;
use crate::model::ModelParams;
use crate::rng::{derive_seed, rng_from};
use crate::{Error, Result};

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Example-weighted mean of the batch bounds seen during the epoch.
    pub breakdown: ElboBreakdown,
    /// Gradient norm of the last batch, before clipping.
    pub grad_norm: f64,
    pub wall_ms: u64,
}

impl EpochRecord {
    /// `{"epoch":..,"elbo":..,"recon_term":..,"kl_term":..,"grad_norm":..,"wall_ms":..}`
    pub fn to_json_line(&self) -> String {
        let b = &self.breakdown;
        serde_json::json!({
            "epoch": self.epoch,
            "elbo": b.elbo,
            "recon_term": b.recon_term,
            "kl_term": b.kl_term,
            "grad_norm": self.grad_norm,
            "wall_ms": self.wall_ms,
        })
        .to_string()
    }
}

/// Noise seed of batch `batch` in epoch `epoch`.
pub fn batch_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    derive_seed(seed, &[0xba7c, epoch as u64, batch as u64])
}

/// Adam over shuffled mini-batches for `cfg.epochs` epochs.
///
/// `on_epoch` sees each record and the updated parameters, typically to
/// append a log line and write a checkpoint. A non-finite bound aborts with
/// [`Error::Diverged`]. Results depend only on `(dataset, params, cfg)`.
pub fn train(
    dataset: &[PairedSequence],
    mut params: ModelParams,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &ModelParams) -> Result<()>,
) -> Result<(ModelParams, Vec<EpochRecord>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let mut adam = Adam::new(&params, cfg.learning_rate);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng_from(cfg.seed, &[0x5f, epoch as u64]));
        let (mut recon, mut kl, mut grad_norm) = (0.0, 0.0, 0.0);
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<PairedSequence> = idx.iter().map(|&i| dataset[i].clone()).collect();
            let (b, mut grads) = backward(&batch, &params, cfg.lambda, cfg.beta, batch_seed(cfg.seed, epoch, bi))?;
            if !b.elbo.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            recon += b.recon_term * batch.len() as f64;
            kl += b.kl_term * batch.len() as f64;
            grad_norm = clip_global_norm(&mut grads, cfg.grad_clip);
            if !grad_norm.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.step(&mut params, &grads);
        }
        let n = dataset.len() as f64;
        let record = EpochRecord {
            epoch,
            breakdown: ElboBreakdown::new(recon / n, kl / n, cfg.lambda, cfg.beta),
            grad_norm,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        on_epoch(&record, &params)?;
        log.push(record);
    }
    Ok((params, log))
}

/// Bound of the whole dataset under a fixed evaluation seed, in batches of
/// `cfg.batch_size`, example-weighted.
pub fn evaluate(dataset: &[PairedSequence], params: &ModelParams, cfg: &TrainConfig, seed: u64) -> Result<ElboBreakdown> {
    if dataset.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let (mut recon, mut kl) = (0.0, 0.0);
    for (bi, batch) in dataset.chunks(cfg.batch_size).enumerate() {
        let b = elbo(batch, params, cfg.lambda, cfg.beta, derive_seed(seed, &[bi as u64]))?;
        recon += b.recon_term * batch.len() as f64;
        kl += b.kl_term * batch.len() as f64;
    }
    let n = dataset.len() as f64;
    Ok(ElboBreakdown::new(recon / n, kl / n, cfg.lambda, cfg.beta))
}
