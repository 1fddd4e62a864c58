use crate::{Error, Result};

/// Bound applied to every log-variance a head produces.
pub const LOG_VAR_CLAMP: f64 = 14.0;

/// Diagonal Gaussian `N(mean, diag(exp(log_var)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.len() != log_var.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has {} entries, log-variance {}",
                mean.len(),
                log_var.len()
            )));
        }
        if mean.iter().chain(&log_var).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("Gaussian parameters must be finite".into()));
        }
        Ok(Self { mean, log_var })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.log_var.iter().map(|l| l.exp()).collect()
    }

    /// Log density at `z`.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.mean
            .iter()
            .zip(&self.log_var)
            .zip(z)
            .map(|((m, lv), x)| -0.5 * (ln_2pi + lv + (x - m).powi(2) / lv.exp()))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    pub z: Vec<f64>,
}

/// `z = mean + exp(0.5·log_var) ⊙ noise`.
pub fn reparameterize(g: &DiagGaussian, noise: &[f64]) -> Result<LatentSample> {
    if noise.len() != g.dim() {
        return Err(Error::DimensionMismatch(format!(
            "noise has {} entries, latent dimension is {}",
            noise.len(),
            g.dim()
        )));
    }
    let z = g
        .mean
        .iter()
        .zip(&g.log_var)
        .zip(noise)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect();
    Ok(LatentSample { z })
}

pub(crate) fn kl_divergence_parts(mq: &[f64], lq: &[f64], mp: &[f64], lp: &[f64]) -> f64 {
    mq.iter()
        .zip(lq)
        .zip(mp.iter().zip(lp))
        .map(|((mq, lq), (mp, lp))| {
            0.5 * (lp - lq + (lq.exp() + (mq - mp).powi(2)) / lp.exp() - 1.0)
        })
        .sum()
}

/// Closed-form `KL(q ‖ p)` between diagonal Gaussians.
pub fn kl_diag_gaussian(q: &DiagGaussian, p: &DiagGaussian) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "KL between {}-dim and {}-dim Gaussians",
            q.dim(),
            p.dim()
        )));
    }
    Ok(kl_divergence_parts(&q.mean, &q.log_var, &p.mean, &p.log_var).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from, standard_normal_vec};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn kl_of_identical_is_zero() {
        let g = DiagGaussian::new(vec![0.3, -1.2], vec![0.5, -2.0]).unwrap();
        assert!(kl_diag_gaussian(&g, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_unit_mean_shift() {
        let q = DiagGaussian::new(vec![1.0], vec![0.0]).unwrap();
        let p = DiagGaussian::standard(1);
        assert!((kl_diag_gaussian(&q, &p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_dimension_mismatch() {
        assert!(kl_diag_gaussian(&DiagGaussian::standard(2), &DiagGaussian::standard(3)).is_err());
    }

    #[test]
    fn reparameterize_edge_cases() {
        let g = DiagGaussian::new(vec![0.5, -0.25, 2.0], vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(reparameterize(&g, &[0.0; 3]).unwrap().z, g.mean);
        assert_eq!(reparameterize(&g, &[0.0, 1.0, 0.0]).unwrap().z, vec![0.5, 0.75, 2.0]);
        assert!(reparameterize(&g, &[0.0; 2]).is_err());
    }

    #[test]
    fn reparameterized_samples_match_moments() {
        let mut rng = rng_from(99, &[]);
        let g = DiagGaussian::new(
            (0..4).map(|_| rng.random_range(-2.0..2.0)).collect(),
            (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let n = 100_000;
        let mut sum = [0.0; 4];
        let mut sq = [0.0; 4];
        for _ in 0..n {
            let z = reparameterize(&g, &standard_normal_vec(&mut rng, 4)).unwrap().z;
            for d in 0..4 {
                sum[d] += z[d];
                sq[d] += z[d] * z[d];
            }
        }
        for d in 0..4 {
            let mean = sum[d] / n as f64;
            let var = sq[d] / n as f64 - mean * mean;
            let sd = (0.5 * g.log_var[d]).exp();
            // 2% of the scale of the distribution
            assert!((mean - g.mean[d]).abs() < 0.02 * sd.max(g.mean[d].abs()), "mean {d}");
            assert!((var / g.log_var[d].exp() - 1.0).abs() < 0.02, "var {d}");
        }
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(
            params in proptest::collection::vec((-5.0f64..5.0, -6.0f64..6.0, -5.0f64..5.0, -6.0f64..6.0), 1..8)
        ) {
            let q = DiagGaussian::new(params.iter().map(|p| p.0).collect(), params.iter().map(|p| p.1).collect()).unwrap();
            let p = DiagGaussian::new(params.iter().map(|p| p.2).collect(), params.iter().map(|p| p.3).collect()).unwrap();
            prop_assert!(kl_diag_gaussian(&q, &p).unwrap() >= 0.0);
            prop_assert!(kl_diag_gaussian(&q, &q).unwrap() <= 1e-12);
        }
    }
}
