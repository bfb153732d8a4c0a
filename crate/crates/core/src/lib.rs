//! MLP-IConv: a self-contained multivariate time-series forecaster.
//!
//! The model predicts the macroscopic trend of every channel with a shared
//! residual MLP and a linear regression head, then refines that trend with a
//! stack of IConv layers. Each IConv layer compresses the horizon with a
//! channel-independent strided convolution (CIPC), mixes information across
//! channels with a pair of channel-axis linear maps (ICM), and expands back
//! to the horizon with a channel-independent transposed convolution (CIPE).
//! The expanded correction is scaled by the per-channel variance of the
//! current trend and added back, so layers successively fill in the local
//! variation an MLP alone misses. Inputs are wrapped in reversible instance
//! normalization (RevIN) to cope with distribution shift.
//!
//! Everything is implemented from scratch in `f64`: dense kernels, batch
//! norm, the backward pass, Adam, and the data pipeline. Gradients of every
//! layer are validated against central finite differences in the test suite.
//!
//! Module map:
//! - [`numerics`]: matrices, deterministic RNG, differentiable primitives,
//!   and the finite-difference oracle.
//! - [`model`]: configuration, parameters, RevIN, forward/backward passes,
//!   checkpoints.
//! - [`train`]: L1 objective, Adam, LR schedule, early-stopped training loop,
//!   MSE/MAE evaluation.
//! - [`data`]: CSV ingestion, chronological splits, standardization, sliding
//!   windows, synthetic series generation.
//! - [`analysis`]: receptive-field gradients, weight-matrix export, the
//!   matmul-vs-1x1-conv equivalence benchmark, forecast decomposition export.

pub mod analysis;
pub mod data;
pub mod error;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
