use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;
use crate::{Error, Result};

/// Network sizes. Checked for mutual consistency on construction and load.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Length of one audio step `a_t` (mel bands × mel frames per video frame).
    pub audio_dim: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Hidden width of the single-hidden-layer Gaussian heads.
    pub head_hidden_dim: usize,
    pub latent_dim: usize,
    /// Frames per context clip (odd).
    pub context_frames: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub frame_channels: usize,
    /// Output channels of each conv + 2×2 pool block.
    pub conv_channels: Vec<usize>,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            audio_dim: 80,
            embed_dim: 64,
            hidden_dim: 64,
            head_hidden_dim: 64,
            latent_dim: 16,
            context_frames: 5,
            frame_height: 32,
            frame_width: 32,
            frame_channels: 1,
            conv_channels: vec![8, 16, 32],
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("audio_dim", self.audio_dim),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("head_hidden_dim", self.head_hidden_dim),
            ("latent_dim", self.latent_dim),
            ("context_frames", self.context_frames),
            ("frame_height", self.frame_height),
            ("frame_width", self.frame_width),
            ("frame_channels", self.frame_channels),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.context_frames.is_multiple_of(2) {
            return Err(Error::InvalidConfig("context_frames must be odd".into()));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return Err(Error::InvalidConfig("conv_channels must be nonempty and positive".into()));
        }
        let div = 1usize << self.conv_channels.len();
        if !self.frame_height.is_multiple_of(div) || !self.frame_width.is_multiple_of(div) {
            return Err(Error::InvalidConfig(format!(
                "frame size {}x{} must be divisible by {div} for {} pooling blocks",
                self.frame_height,
                self.frame_width,
                self.conv_channels.len()
            )));
        }
        Ok(())
    }

    /// Channels of the stacked clip fed to the first convolution.
    pub fn clip_channels(&self) -> usize {
        self.context_frames * self.frame_channels
    }

    pub fn clip_len(&self) -> usize {
        self.clip_channels() * self.frame_height * self.frame_width
    }

    /// Flattened size after the last pooling block.
    pub fn conv_output_len(&self) -> usize {
        let div = 1usize << self.conv_channels.len();
        self.conv_channels.last().copied().unwrap_or(0) * (self.frame_height / div) * (self.frame_width / div)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinearId {
    pub weight: usize,
    pub bias: usize,
}

/// Tensor indices of every parameter group, derived from [`ModelDims`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub audio_embed: [LinearId; 3],
    pub audio_lstm: LinearId,
    pub posterior_mean: [LinearId; 2],
    pub posterior_logvar: [LinearId; 2],
    pub frame_conv: Vec<LinearId>,
    pub frame_fc: LinearId,
    pub frame_lstm: LinearId,
    pub prior_mean: [LinearId; 2],
    pub prior_logvar: [LinearId; 2],
    pub decoder_lstm: LinearId,
    pub audio_decoder: [LinearId; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

struct LayoutBuilder {
    specs: Vec<(String, Vec<usize>)>,
}

impl LayoutBuilder {
    fn linear(&mut self, name: &str, out: usize, inp: usize) -> LinearId {
        self.tensor_pair(name, vec![out, inp], vec![out])
    }

    fn tensor_pair(&mut self, name: &str, w: Vec<usize>, b: Vec<usize>) -> LinearId {
        self.specs.push((format!("{name}.weight"), w));
        self.specs.push((format!("{name}.bias"), b));
        LinearId {
            weight: self.specs.len() - 2,
            bias: self.specs.len() - 1,
        }
    }

    fn chain<const N: usize>(&mut self, name: &str, widths: &[usize]) -> [LinearId; N] {
        assert_eq!(widths.len(), N + 1);
        std::array::from_fn(|i| self.linear(&format!("{name}.{i}"), widths[i + 1], widths[i]))
    }
}

impl Layout {
    /// Layout plus `(name, shape)` of every tensor in canonical order.
    pub fn build(d: &ModelDims) -> (Self, Vec<(String, Vec<usize>)>) {
        let mut b = LayoutBuilder { specs: Vec::new() };
        let (e, h, hh, l) = (d.embed_dim, d.hidden_dim, d.head_hidden_dim, d.latent_dim);
        let audio_embed = b.chain("audio_embed", &[d.audio_dim, e, e, e]);
        let audio_lstm = b.linear("audio_lstm", 4 * h, e + h);
        let posterior_mean = b.chain("posterior_mean", &[h, hh, l]);
        let posterior_logvar = b.chain("posterior_logvar", &[h, hh, l]);
        let mut frame_conv = Vec::new();
        let mut c_in = d.clip_channels();
        for (i, &c_out) in d.conv_channels.iter().enumerate() {
            frame_conv.push(b.tensor_pair(
                &format!("frame_encoder.conv{i}"),
                vec![c_out, c_in, 3, 3],
                vec![c_out],
            ));
            c_in = c_out;
        }
        let frame_fc = b.linear("frame_encoder.fc", e, d.conv_output_len());
        let frame_lstm = b.linear("frame_lstm", 4 * h, e + h);
        let prior_mean = b.chain("prior_mean", &[h, hh, l]);
        let prior_logvar = b.chain("prior_logvar", &[h, hh, l]);
        let decoder_lstm = b.linear("decoder_lstm", 4 * h, l + h);
        let audio_decoder = b.chain("audio_decoder", &[h, e, e, d.audio_dim]);
        let layout = Self {
            audio_embed,
            audio_lstm,
            posterior_mean,
            posterior_logvar,
            frame_conv,
            frame_fc,
            frame_lstm,
            prior_mean,
            prior_logvar,
            decoder_lstm,
            audio_decoder,
        };
        (layout, b.specs)
    }

    fn lstm_ids(&self) -> [LinearId; 3] {
        [self.audio_lstm, self.frame_lstm, self.decoder_lstm]
    }
}

/// Every trainable tensor of the model plus the dimension record.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub layout: Layout,
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        let (layout, specs) = Layout::build(&dims);
        let tensors = specs
            .into_iter()
            .map(|(name, shape)| Tensor::zeros(name, shape))
            .collect();
        Ok(Self {
            dims,
            layout,
            tensors,
        })
    }

    /// Glorot-uniform weights, zero biases, forget-gate bias 1.
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        for (i, t) in p.tensors.iter_mut().enumerate() {
            if t.shape.len() < 2 {
                continue;
            }
            let receptive: usize = t.shape[2..].iter().product();
            let fan_out = t.shape[0] * receptive;
            let fan_in = t.shape[1] * receptive;
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut rng = rng_from(seed, &[i as u64]);
            t.data.iter_mut().for_each(|v| *v = rng.random_range(-a..a));
        }
        let h = p.dims.hidden_dim;
        for id in p.layout.lstm_ids() {
            p.tensors[id.bias].data[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        }
        Ok(p)
    }

    /// Rebuilds from loaded tensors, checking names and shapes against `dims`.
    pub fn from_tensors(dims: ModelDims, tensors: Vec<Tensor>) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        if tensors.len() != p.tensors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tensors supplied, dimensions imply {}",
                tensors.len(),
                p.tensors.len()
            )));
        }
        for (dst, src) in p.tensors.iter_mut().zip(tensors) {
            if dst.shape != src.shape {
                return Err(Error::DimensionMismatch(format!(
                    "{}: shape {:?}, dimensions imply {:?}",
                    dst.name, src.shape, dst.shape
                )));
            }
            if src.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{} has non-finite values", dst.name)));
            }
            dst.data = src.data;
        }
        Ok(p)
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Same layout, all values zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Vec<Vec<f64>> {
        self.tensors.iter().map(|t| vec![0.0; t.len()]).collect()
    }

    /// Sets the decoder's output bias, e.g. to the training-set mean frame.
    pub fn set_output_bias(&mut self, bias: &[f64]) -> Result<()> {
        let id = self.layout.audio_decoder[2].bias;
        if bias.len() != self.tensors[id].len() {
            return Err(Error::DimensionMismatch(format!(
                "output bias of length {}, audio_dim is {}",
                bias.len(),
                self.dims.audio_dim
            )));
        }
        self.tensors[id].data.copy_from_slice(bias);
        Ok(())
    }
}
