use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which parts of the architecture are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Trend MLP + full IConv stack.
    Full,
    /// IConv layers keep CIPC and CIPE but the inter-channel mixer is the
    /// identity.
    NoIcm,
    /// Trend MLP + RevIN only; no IConv layers at all.
    NoIconv,
}

impl Ablation {
    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoIcm => "no_icm",
            Ablation::NoIconv => "no_iconv",
        }
    }
}

/// How weights are drawn at init.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitScheme {
    /// Every weight ~ Normal(0, 0.01^2); the default.
    #[serde(rename = "normal_0.01")]
    Normal001,
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor.
    #[serde(rename = "fan_in_uniform")]
    FanInUniform,
}

impl InitScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            InitScheme::Normal001 => "normal_0.01",
            InitScheme::FanInUniform => "fan_in_uniform",
        }
    }
}

/// Architecture hyperparameters of the forecaster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IConvConfig {
    /// Number of channels C.
    pub channels: usize,
    /// Input window length T.
    pub input_len: usize,
    /// Forecast horizon L.
    pub horizon: usize,
    /// Hidden width of the trend encoder.
    pub d_model: usize,
    /// Residual encoder blocks stacked before the regression head.
    pub enc_blocks: usize,
    /// Kernel sizes per IConv layer, strictly decreasing.
    pub kernel_sizes: Vec<usize>,
    /// Stride shared by every IConv layer.
    pub stride: usize,
    /// Filters per channel, shared by every IConv layer.
    pub multiplier: usize,
    pub ablation: Ablation,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub revin_epsilon: f64,
    /// Scale corrections by the per-channel std instead of the variance.
    /// Off by default; exposed for experimentation only.
    pub scale_by_std: bool,
}

impl IConvConfig {
    /// Sensible defaults around a given data shape; callers override fields
    /// as needed.
    pub fn new(channels: usize, input_len: usize, horizon: usize) -> Self {
        IConvConfig {
            channels,
            input_len,
            horizon,
            d_model: 128,
            enc_blocks: 1,
            kernel_sizes: vec![24, 16, 8],
            stride: 4,
            multiplier: 4,
            ablation: Ablation::Full,
            bn_momentum: 0.1,
            bn_epsilon: 1e-5,
            revin_epsilon: 1e-5,
            scale_by_std: false,
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    /// Number of active IConv layers.
    pub fn n_layers(&self) -> usize {
        match self.ablation {
            Ablation::NoIconv => 0,
            _ => self.kernel_sizes.len(),
        }
    }

    /// Hidden length N_i = (L - P_i) / S + 1 of layer `i`.
    pub fn hidden_len(&self, layer: usize) -> usize {
        (self.horizon - self.kernel_sizes[layer]) / self.stride + 1
    }

    /// The canonical grids restrict strides to 3 or 4; anything else is
    /// allowed but flagged so runs can be labeled.
    pub fn is_canonical_stride(&self) -> bool {
        self.stride == 3 || self.stride == 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.input_len == 0 || self.horizon == 0 {
            return Err(Error::Config("channels, input_len and horizon must be positive".into()));
        }
        if self.d_model == 0 || self.enc_blocks == 0 {
            return Err(Error::Config("d_model and enc_blocks must be positive".into()));
        }
        if self.ablation != Ablation::NoIconv {
            if self.kernel_sizes.is_empty() {
                return Err(Error::Config("at least one kernel size is required".into()));
            }
            if self.stride == 0 || self.multiplier == 0 {
                return Err(Error::Config("stride and multiplier must be positive".into()));
            }
            for w in self.kernel_sizes.windows(2) {
                if w[0] <= w[1] {
                    return Err(Error::Config(format!(
                        "kernel sizes must strictly decrease, got {:?}",
                        self.kernel_sizes
                    )));
                }
            }
            for &p in &self.kernel_sizes {
                if p == 0 || p > self.horizon {
                    return Err(Error::Config(format!(
                        "kernel size {p} invalid for horizon {}",
                        self.horizon
                    )));
                }
                if (self.horizon - p) % self.stride != 0 {
                    return Err(Error::Config(format!(
                        "horizon {} minus kernel size {p} must be completely divisible \
                         by stride size {}",
                        self.horizon, self.stride
                    )));
                }
            }
        }
        if self.bn_momentum <= 0.0 || self.bn_momentum >= 1.0 {
            return Err(Error::Config(format!(
                "bn_momentum must lie in (0, 1), got {}",
                self.bn_momentum
            )));
        }
        if self.bn_epsilon <= 0.0 || self.revin_epsilon <= 0.0 {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        Ok(())
    }
}
