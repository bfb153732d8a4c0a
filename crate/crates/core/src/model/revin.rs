use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{mean_per_channel, variance_per_channel, Matrix};

/// Per-instance channel statistics stored by [`revin_normalize`] and
/// replayed by [`revin_denormalize`]. No learnable parameters: a plain
/// store/restore wrapper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevinState {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub epsilon: f64,
}

impl RevinState {
    pub fn scale(&self, channel: usize) -> f64 {
        (self.var[channel] + self.epsilon).sqrt()
    }
}

/// Normalize each channel of `x` to zero mean and unit variance using its own
/// statistics, which are returned for the inverse transform.
pub fn revin_normalize(x: &Matrix, epsilon: f64) -> (Matrix, RevinState) {
    let mean = mean_per_channel(x);
    let var = variance_per_channel(x);
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for c in 0..x.rows() {
        let inv = 1.0 / (var[c] + epsilon).sqrt();
        let src = x.row(c);
        for (d, &v) in out.row_mut(c).iter_mut().zip(src) {
            *d = (v - mean[c]) * inv;
        }
    }
    (out, RevinState { mean, var, epsilon })
}

/// Apply the stored statistics back onto a prediction:
/// `y * sqrt(var + eps) + mean` per channel.
pub fn revin_denormalize(y: &Matrix, state: &RevinState) -> Result<Matrix> {
    if y.rows() != state.mean.len() {
        return Err(Error::Shape(format!(
            "prediction has {} channels, state stores {}",
            y.rows(),
            state.mean.len()
        )));
    }
    let mut out = Matrix::zeros(y.rows(), y.cols());
    for c in 0..y.rows() {
        let s = state.scale(c);
        let m = state.mean[c];
        for (d, &v) in out.row_mut(c).iter_mut().zip(y.row(c)) {
            *d = v * s + m;
        }
    }
    Ok(out)
}
