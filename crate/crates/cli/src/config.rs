//! Flat `key = value` TOML files. Every key is optional; command-line flags
//! win over the file.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use vidspeech::dataio::SyntheticTaskConfig;
use vidspeech::model::ModelDims;
use vidspeech::training::TrainConfig;

use crate::error::{io_error, CliError, CliResult};

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
}

pub fn load_synth(path: Option<&Path>) -> CliResult<SyntheticTaskConfig> {
    load(path)
}

/// Optimiser settings plus the free model dimensions. The data-determined
/// dimensions (audio size, frame size) come from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub lambda: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub grad_clip: f64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub head_hidden_dim: usize,
    pub latent_dim: usize,
    pub context_frames: usize,
    pub conv_channels: Vec<usize>,
    /// Seed of the weight initialisation.
    pub init_seed: u64,
}

impl Default for TrainFile {
    fn default() -> Self {
        let t = TrainConfig::default();
        let d = ModelDims::default();
        Self {
            lambda: t.lambda,
            beta: t.beta,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            grad_clip: t.grad_clip,
            embed_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
            head_hidden_dim: d.head_hidden_dim,
            latent_dim: d.latent_dim,
            context_frames: d.context_frames,
            conv_channels: d.conv_channels,
            init_seed: 0,
        }
    }
}

impl TrainFile {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            beta: self.beta,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            grad_clip: self.grad_clip,
        }
    }

    pub fn dims(&self, audio_dim: usize, height: usize, width: usize, channels: usize) -> ModelDims {
        ModelDims {
            audio_dim,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            head_hidden_dim: self.head_hidden_dim,
            latent_dim: self.latent_dim,
            context_frames: self.context_frames,
            frame_height: height,
            frame_width: width,
            frame_channels: channels,
            conv_channels: self.conv_channels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.toml");
        fs::write(&p, "epochs = 3\nlearning_rat = 0.1\n").unwrap();
        let err = load::<TrainFile>(Some(&p)).unwrap_err();
        assert!(err.to_string().contains("learning_rat"), "{err}");
        fs::write(&p, "n_sequence = 3\n").unwrap();
        assert!(load_synth(Some(&p)).unwrap_err().to_string().contains("n_sequence"));
    }

    #[test]
    fn missing_file_means_defaults() {
        assert_eq!(load::<TrainFile>(None).unwrap(), TrainFile::default());
        assert_eq!(TrainFile::default().train_config(), TrainConfig::default());
    }
}
