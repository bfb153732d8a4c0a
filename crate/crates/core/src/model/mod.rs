//! The MLP-IConv forecaster: configuration, parameters, RevIN wrapper,
//! forward and backward passes, and checkpoint serialization.

mod backward;
mod checkpoint;
mod config;
mod forward;
mod params;
mod revin;

pub use backward::{backward_batch, BatchGradients};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use config::{Ablation, IConvConfig, InitScheme};
pub use forward::{
    cipc_forward, cipe_forward, forward_batch, icm_forward, icm_forward_conv1x1, iconv_layer,
    mlp_encode, model_forward, trend_regress, variance_gate, EncBlockTrace, ForwardTrace,
    IcmTrace, LayerTrace,
};
pub use params::{init_params, EncoderBlock, IConvLayerParams, IcmParams, ModelParams};
pub use revin::{revin_denormalize, revin_normalize, RevinState};
