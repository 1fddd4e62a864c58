use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Optimisation settings. Every key is optional in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the reconstruction term.
    pub lambda: f64,
    /// Weight of the KL term.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm bound; `0` disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            beta: 1e-6,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 8,
            seed: 0,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.beta < 0.0 || !self.beta.is_finite() {
            return bad(format!("beta must be nonnegative, got {}", self.beta));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be nonnegative, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.grad_clip.is_nan() || self.grad_clip < 0.0 {
            return bad(format!("grad_clip must be nonnegative, got {}", self.grad_clip));
        }
        Ok(())
    }

    /// Parses flat `key = value` TOML; unknown keys are rejected by name.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
