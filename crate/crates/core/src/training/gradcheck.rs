use super::objective::backward;
use crate::dataio::PairedSequence;
use crate::model::ModelParams;
use crate::Result;

/// Central differences `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every `i`.
pub fn finite_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max|a − n| / max(max|a|, max|n|)`: worst deviation relative to the
/// tensor's gradient scale. Zero when both are identically zero.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorGradError {
    pub name: String,
    pub len: usize,
    pub relative_error: f64,
    /// Largest analytic gradient magnitude, to spot tensors the loss ignores.
    pub scale: f64,
}

/// Analytic vs finite-difference gradients, one entry per tensor, worst first.
#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub tensors: Vec<TensorGradError>,
    pub max_error: f64,
}

/// Compares [`backward`] with central differences of `−elbo` for every
/// element of every tensor. Meant for toy-sized models.
pub fn grad_check(
    params: &ModelParams,
    batch: &[PairedSequence],
    lambda: f64,
    beta: f64,
    seed: u64,
    h: f64,
) -> Result<GradReport> {
    let (_, analytic) = backward(batch, params, lambda, beta, seed)?;
    let mut probe = params.clone();
    let mut tensors = Vec::with_capacity(params.tensors.len());
    for (ti, a) in analytic.iter().enumerate() {
        let base = params.tensors[ti].data.clone();
        let mut failure = None;
        let numeric = finite_difference(&base, h, |x| {
            probe.tensors[ti].data.copy_from_slice(x);
            match super::objective::elbo(batch, &probe, lambda, beta, seed) {
                Ok(e) => e.loss(),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        probe.tensors[ti].data.copy_from_slice(&base);
        tensors.push(TensorGradError {
            name: params.tensors[ti].name.clone(),
            len: base.len(),
            relative_error: relative_error(a, &numeric),
            scale: a.iter().map(|v| v.abs()).fold(0.0, f64::max),
        });
    }
    tensors.sort_by(|a, b| b.relative_error.total_cmp(&a.relative_error));
    let max_error = tensors.first().map_or(0.0, |t| t.relative_error);
    Ok(GradReport { tensors, max_error })
}
