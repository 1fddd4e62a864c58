use crate::dataio::PairedSequence;
use crate::model::{check_sequence, sequence_noise, unroll_training, ModelParams, Unrolled};
use crate::rng::derive_seed;
use crate::tape::Tape;
use crate::{Error, Result};

/// Batch-mean terms of the lower bound.
///
/// `recon_term = Σ_t −λ·½‖a_t − â_t‖²` (fixed unit-variance Gaussian
/// likelihood with its constant dropped), `kl_term = Σ_t KL(q(z|a_t) ‖ q(z|f_t))`
/// and `elbo = recon_term − β·kl_term`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboBreakdown {
    pub recon_term: f64,
    pub kl_term: f64,
    pub elbo: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl ElboBreakdown {
    pub fn new(recon_term: f64, kl_term: f64, lambda: f64, beta: f64) -> Self {
        Self {
            recon_term,
            kl_term,
            elbo: recon_term - beta * kl_term,
            lambda,
            beta,
        }
    }

    /// The minimised quantity, `−elbo`.
    pub fn loss(&self) -> f64 {
        -self.elbo
    }
}

/// Noise seed of example `index` within a batch evaluated under `seed`.
pub fn example_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[index as u64])
}

struct ExampleTerms {
    sq_err: f64,
    kl: f64,
    grads: Option<Vec<Vec<f64>>>,
}

fn run_example(
    ex: &PairedSequence,
    params: &ModelParams,
    lambda: f64,
    beta: f64,
    seed: u64,
    with_grad: bool,
) -> Result<ExampleTerms> {
    check_sequence(params, &ex.clips, &ex.audio)?;
    let noise = sequence_noise(seed, ex.len(), params.dims.latent_dim);
    let mut tape = Tape::new();
    let mut net = Unrolled::new(&mut tape, params);
    let terms = unroll_training(&mut tape, &mut net, &ex.clips, &ex.audio, noise);
    let (sq_err, kl) = (tape.scalar(terms.sq_err), tape.scalar(terms.kl));
    let grads = with_grad.then(|| {
        let loss = tape.weighted_sum(&[(terms.sq_err, lambda), (terms.kl, beta)]);
        let g = tape.backward(loss);
        net.param_vars().iter().map(|&v| g.wrt(v)).collect()
    });
    Ok(ExampleTerms { sq_err, kl, grads })
}

fn check_batch(batch: &[PairedSequence]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("batch".into()));
    }
    Ok(())
}

/// Lower bound of a batch; example `i` draws its latent noise from
/// [`example_seed`]`(seed, i)`.
pub fn elbo(batch: &[PairedSequence], params: &ModelParams, lambda: f64, beta: f64, seed: u64) -> Result<ElboBreakdown> {
    Ok(backward_impl(batch, params, lambda, beta, seed, false)?.0)
}

/// Gradient of `−elbo` with respect to every tensor of `params`, in layout
/// order, together with the bound itself.
pub fn backward(
    batch: &[PairedSequence],
    params: &ModelParams,
    lambda: f64,
    beta: f64,
    seed: u64,
) -> Result<(ElboBreakdown, Vec<Vec<f64>>)> {
    backward_impl(batch, params, lambda, beta, seed, true)
}

fn backward_impl(
    batch: &[PairedSequence],
    params: &ModelParams,
    lambda: f64,
    beta: f64,
    seed: u64,
    with_grad: bool,
) -> Result<(ElboBreakdown, Vec<Vec<f64>>)> {
    check_batch(batch)?;
    let scale = 1.0 / batch.len() as f64;
    let mut grads = params.zeros_like();
    let (mut sq, mut kl) = (0.0, 0.0);
    // fixed summation order keeps results independent of how work is split
    for (i, ex) in batch.iter().enumerate() {
        let t = run_example(ex, params, lambda, beta, example_seed(seed, i), with_grad)?;
        sq += t.sq_err;
        kl += t.kl;
        if let Some(g) = t.grads {
            for (acc, gi) in grads.iter_mut().zip(g) {
                acc.iter_mut().zip(gi).for_each(|(a, v)| *a += scale * v);
            }
        }
    }
    let breakdown = ElboBreakdown::new(-lambda * sq * scale, kl * scale, lambda, beta);
    Ok((breakdown, grads))
}
