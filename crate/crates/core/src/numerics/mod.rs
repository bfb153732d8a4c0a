//! Deterministic dense numeric core: array storage, the differentiable
//! primitives the model is built from, and the finite-difference oracle used
//! to validate every analytic gradient.

mod gradcheck;
mod matrix;
mod ops;
mod rng;

pub use gradcheck::{finite_diff_gradient, gradients_close, max_relative_error};
pub use matrix::{Matrix, Tensor3};
pub use ops::{
    add_bias_per_col, add_bias_per_row, batch_norm_backward, batch_norm_forward,
    grouped_conv1d, grouped_conv1d_backward, grouped_transposed_conv1d,
    grouped_transposed_conv1d_backward, matmul, mean_per_channel, relu, relu_backward,
    variance_per_channel, BnForward, BnParams, BnStats, Mode,
};
pub use rng::Rng;
