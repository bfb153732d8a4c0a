use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Whether batched operations use batch statistics (`Train`) or frozen
/// running statistics (`Eval`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Standard matrix product. `a.cols` must equal `b.rows`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "matmul {}x{} * {}x{}: inner dimensions differ",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (k, &a_ik) in a_row.iter().enumerate() {
            let b_row = b.row(k);
            for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                *o += a_ik * b_kj;
            }
        }
    }
    Ok(out)
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient gate of ReLU: passes `upstream` where the pre-activation was
/// strictly positive.
pub fn relu_backward(pre: &Matrix, upstream: &Matrix) -> Matrix {
    assert_eq!(pre.shape(), upstream.shape(), "relu_backward shape mismatch");
    let mut out = upstream.clone();
    for (o, &p) in out.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *o = 0.0;
        }
    }
    out
}

/// Broadcast-add `bias[c]` to every row at column `c`.
pub fn add_bias_per_col(m: &mut Matrix, bias: &[f64]) {
    assert_eq!(m.cols(), bias.len(), "per-column bias length mismatch");
    for r in 0..m.rows() {
        for (v, &b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Broadcast-add `bias[r]` to every column of row `r`.
pub fn add_bias_per_row(m: &mut Matrix, bias: &[f64]) {
    assert_eq!(m.rows(), bias.len(), "per-row bias length mismatch");
    for (r, &b) in bias.iter().enumerate() {
        for v in m.row_mut(r) {
            *v += b;
        }
    }
}

fn conv_dims(len: usize, kernel: usize, stride: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::Config("kernel size and stride must be positive".into()));
    }
    if kernel > len {
        return Err(Error::Config(format!(
            "kernel size {kernel} exceeds sequence length {len}"
        )));
    }
    if (len - kernel) % stride != 0 {
        return Err(Error::Config(format!(
            "sequence length {len} minus kernel size {kernel} must be completely \
             divisible by stride size {stride}"
        )));
    }
    Ok((len - kernel) / stride + 1)
}

/// Channel-independent strided convolution (valid cross-correlation, no
/// padding). Input `x` is `C x L`; `kernels` holds one length-`P` row per
/// (channel, filter) pair at row index `c * multiplier + m`; `biases` has one
/// entry per kernel row. Output is `(C * multiplier) x N` with
/// `N = (L - P) / S + 1`.
pub fn grouped_conv1d(
    x: &Matrix,
    kernels: &Matrix,
    biases: &[f64],
    multiplier: usize,
    stride: usize,
) -> Result<Matrix> {
    let channels = x.rows();
    if kernels.rows() != channels * multiplier {
        return Err(Error::Shape(format!(
            "kernels {}x{} do not match {channels} channels * multiplier {multiplier}",
            kernels.rows(),
            kernels.cols()
        )));
    }
    if biases.len() != kernels.rows() {
        return Err(Error::Shape(format!(
            "{} kernel biases for {} kernel rows",
            biases.len(),
            kernels.rows()
        )));
    }
    let kernel_len = kernels.cols();
    let n_out = conv_dims(x.cols(), kernel_len, stride)?;
    let mut out = Matrix::zeros(channels * multiplier, n_out);
    for c in 0..channels {
        let x_row = x.row(c);
        for m in 0..multiplier {
            let row_idx = c * multiplier + m;
            let kernel = kernels.row(row_idx);
            let out_row = out.row_mut(row_idx);
            for (n, o) in out_row.iter_mut().enumerate() {
                let start = n * stride;
                let mut acc = biases[row_idx];
                for (p, &k) in kernel.iter().enumerate() {
                    acc += k * x_row[start + p];
                }
                *o = acc;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`grouped_conv1d`] given upstream gradients `d_out`.
/// Returns `(d_x, d_kernels, d_biases)`.
pub fn grouped_conv1d_backward(
    x: &Matrix,
    kernels: &Matrix,
    multiplier: usize,
    stride: usize,
    d_out: &Matrix,
) -> (Matrix, Matrix, Vec<f64>) {
    let channels = x.rows();
    let kernel_len = kernels.cols();
    let n_out = d_out.cols();
    let mut d_x = Matrix::zeros(channels, x.cols());
    let mut d_kernels = Matrix::zeros(kernels.rows(), kernel_len);
    let mut d_biases = vec![0.0; kernels.rows()];
    for c in 0..channels {
        let x_row = x.row(c);
        for m in 0..multiplier {
            let row_idx = c * multiplier + m;
            let kernel = kernels.row(row_idx);
            let d_row = d_out.row(row_idx);
            let dk_row = d_kernels.row_mut(row_idx);
            for (n, &g) in d_row.iter().enumerate() {
                let start = n * stride;
                d_biases[row_idx] += g;
                for p in 0..kernel_len {
                    dk_row[p] += g * x_row[start + p];
                }
            }
            let dx_row = d_x.row_mut(c);
            // Input gradient is the adjoint scatter of the upstream signal.
            for (n, &g) in d_row.iter().enumerate() {
                let start = n * stride;
                for (p, &k) in kernel.iter().enumerate() {
                    dx_row[start + p] += k * g;
                }
            }
        }
        let _ = n_out;
    }
    (d_x, d_kernels, d_biases)
}

/// Channel-independent transposed convolution. Input `h` is
/// `(C * multiplier) x N`: each channel's `multiplier` rows are consumed
/// jointly. Every input position `n` scatters `kernel * h[., n]` into the
/// output window `[n*S, n*S + P)`; overlaps accumulate. One bias per output
/// channel. Output is `C x L` with `L = (N - 1) * S + P`.
pub fn grouped_transposed_conv1d(
    h: &Matrix,
    kernels: &Matrix,
    biases: &[f64],
    multiplier: usize,
    stride: usize,
) -> Result<Matrix> {
    if multiplier == 0 || h.rows() % multiplier != 0 {
        return Err(Error::Shape(format!(
            "{} hidden rows not divisible by multiplier {multiplier}",
            h.rows()
        )));
    }
    let channels = h.rows() / multiplier;
    if kernels.rows() != h.rows() {
        return Err(Error::Shape(format!(
            "kernels {}x{} do not match hidden rows {}",
            kernels.rows(),
            kernels.cols(),
            h.rows()
        )));
    }
    if biases.len() != channels {
        return Err(Error::Shape(format!(
            "{} channel biases for {channels} channels",
            biases.len()
        )));
    }
    if stride == 0 || kernels.cols() == 0 {
        return Err(Error::Config("kernel size and stride must be positive".into()));
    }
    let kernel_len = kernels.cols();
    let out_len = (h.cols() - 1) * stride + kernel_len;
    let mut out = Matrix::zeros(channels, out_len);
    for c in 0..channels {
        {
            let out_row = out.row_mut(c);
            out_row.fill(biases[c]);
        }
        for n in 0..h.cols() {
            let start = n * stride;
            for p in 0..kernel_len {
                let mut acc = 0.0;
                for m in 0..multiplier {
                    let row_idx = c * multiplier + m;
                    acc += kernels.get(row_idx, p) * h.get(row_idx, n);
                }
                let out_row = out.row_mut(c);
                out_row[start + p] += acc;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`grouped_transposed_conv1d`].
/// Returns `(d_h, d_kernels, d_biases)`.
pub fn grouped_transposed_conv1d_backward(
    h: &Matrix,
    kernels: &Matrix,
    multiplier: usize,
    stride: usize,
    d_out: &Matrix,
) -> (Matrix, Matrix, Vec<f64>) {
    let channels = h.rows() / multiplier;
    let kernel_len = kernels.cols();
    let mut d_h = Matrix::zeros(h.rows(), h.cols());
    let mut d_kernels = Matrix::zeros(kernels.rows(), kernel_len);
    let mut d_biases = vec![0.0; channels];
    for c in 0..channels {
        let d_row = d_out.row(c);
        d_biases[c] = d_row.iter().sum();
        for m in 0..multiplier {
            let row_idx = c * multiplier + m;
            let kernel = kernels.row(row_idx);
            let h_row = h.row(row_idx);
            let dh_row = d_h.row_mut(row_idx);
            let dk_row = d_kernels.row_mut(row_idx);
            for n in 0..h.cols() {
                let start = n * stride;
                // dL/dh is the adjoint gather, i.e. a plain convolution of d_out.
                let mut acc = 0.0;
                for (p, &k) in kernel.iter().enumerate() {
                    acc += k * d_row[start + p];
                    dk_row[p] += h_row[n] * d_row[start + p];
                }
                dh_row[n] = acc;
            }
        }
    }
    (d_h, d_kernels, d_biases)
}

/// Learnable scale/shift plus running statistics for batch normalization.
/// One entry per row group (rows of the normalized matrices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BnParams {
    pub fn new(groups: usize) -> Self {
        BnParams {
            gamma: vec![1.0; groups],
            beta: vec![0.0; groups],
            running_mean: vec![0.0; groups],
            running_var: vec![1.0; groups],
        }
    }

    pub fn groups(&self) -> usize {
        self.gamma.len()
    }

    /// Exponential update of the running statistics after a train-mode pass.
    pub fn update_running(&mut self, stats: &BnStats, momentum: f64) {
        for g in 0..self.groups() {
            self.running_mean[g] =
                (1.0 - momentum) * self.running_mean[g] + momentum * stats.mean[g];
            self.running_var[g] =
                (1.0 - momentum) * self.running_var[g] + momentum * stats.var[g];
        }
    }
}

/// Per-group statistics actually used to normalize a batch.
#[derive(Clone, Debug)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Saved activations from a batch-norm forward pass.
#[derive(Clone, Debug)]
pub struct BnForward {
    pub output: Vec<Matrix>,
    /// Normalized values before gamma/beta.
    pub xhat: Vec<Matrix>,
    pub stats: BnStats,
    pub mode: Mode,
    pub eps: f64,
}

/// Batch normalization over a batch of matrices. Each row index is one group;
/// train mode normalizes with statistics over (batch x columns), eval mode
/// with the running statistics. Population variance throughout.
pub fn batch_norm_forward(
    xs: &[Matrix],
    bn: &BnParams,
    mode: Mode,
    eps: f64,
) -> Result<BnForward> {
    if xs.is_empty() {
        return Err(Error::Config("batch_norm on an empty batch".into()));
    }
    if eps <= 0.0 {
        return Err(Error::Config("batch_norm epsilon must be positive".into()));
    }
    let (rows, cols) = xs[0].shape();
    if rows != bn.groups() {
        return Err(Error::Shape(format!(
            "batch_norm state for {} groups applied to {rows} rows",
            bn.groups()
        )));
    }
    for x in xs {
        if x.shape() != (rows, cols) {
            return Err(Error::Shape("batch_norm batch has mixed shapes".into()));
        }
    }
    let stats = match mode {
        Mode::Train => {
            let count = (xs.len() * cols) as f64;
            let mut mean = vec![0.0; rows];
            let mut var = vec![0.0; rows];
            for r in 0..rows {
                let mut sum = 0.0;
                for x in xs {
                    sum += x.row(r).iter().sum::<f64>();
                }
                let mu = sum / count;
                let mut sq = 0.0;
                for x in xs {
                    for &v in x.row(r) {
                        let d = v - mu;
                        sq += d * d;
                    }
                }
                mean[r] = mu;
                var[r] = sq / count;
            }
            BnStats { mean, var }
        }
        Mode::Eval => BnStats { mean: bn.running_mean.clone(), var: bn.running_var.clone() },
    };
    let mut output = Vec::with_capacity(xs.len());
    let mut xhat = Vec::with_capacity(xs.len());
    for x in xs {
        let mut xh = Matrix::zeros(rows, cols);
        let mut y = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let inv = 1.0 / (stats.var[r] + eps).sqrt();
            let (g, b) = (bn.gamma[r], bn.beta[r]);
            let src = x.row(r);
            let xh_row = xh.row_mut(r);
            for (d, &v) in xh_row.iter_mut().zip(src) {
                *d = (v - stats.mean[r]) * inv;
            }
            let y_row = y.row_mut(r);
            for (d, &v) in y_row.iter_mut().zip(xh.row(r)) {
                *d = g * v + b;
            }
        }
        xhat.push(xh);
        output.push(y);
    }
    Ok(BnForward { output, xhat, stats, mode, eps })
}

/// Gradients of batch normalization. Train mode accounts for the dependence
/// of the batch statistics on the inputs; eval mode treats them as constants.
pub fn batch_norm_backward(
    fwd: &BnForward,
    bn: &BnParams,
    d_out: &[Matrix],
) -> (Vec<Matrix>, Vec<f64>, Vec<f64>) {
    let rows = bn.groups();
    let cols = fwd.xhat[0].cols();
    let batch = fwd.xhat.len();
    assert_eq!(d_out.len(), batch, "batch_norm_backward batch mismatch");
    let count = (batch * cols) as f64;
    let mut d_gamma = vec![0.0; rows];
    let mut d_beta = vec![0.0; rows];
    for (xh, dy) in fwd.xhat.iter().zip(d_out) {
        for r in 0..rows {
            for (&x, &g) in xh.row(r).iter().zip(dy.row(r)) {
                d_gamma[r] += g * x;
                d_beta[r] += g;
            }
        }
    }
    let mut d_x = vec![Matrix::zeros(rows, cols); batch];
    for r in 0..rows {
        let inv = bn.gamma[r] / (fwd.stats.var[r] + fwd.eps).sqrt();
        match fwd.mode {
            Mode::Train => {
                let mean_dy = d_beta[r] / count;
                let mean_dy_xhat = d_gamma[r] / count;
                for b in 0..batch {
                    let xh_row = fwd.xhat[b].row(r);
                    let dy_row = d_out[b].row(r);
                    let dx_row = d_x[b].row_mut(r);
                    for ((d, &g), &x) in dx_row.iter_mut().zip(dy_row).zip(xh_row) {
                        *d = inv * (g - mean_dy - x * mean_dy_xhat);
                    }
                }
            }
            Mode::Eval => {
                for b in 0..batch {
                    let dy_row = d_out[b].row(r);
                    let dx_row = d_x[b].row_mut(r);
                    for (d, &g) in dx_row.iter_mut().zip(dy_row) {
                        *d = inv * g;
                    }
                }
            }
        }
    }
    (d_x, d_gamma, d_beta)
}

/// Population mean of each row.
pub fn mean_per_channel(x: &Matrix) -> Vec<f64> {
    (0..x.rows())
        .map(|r| x.row(r).iter().sum::<f64>() / x.cols() as f64)
        .collect()
}

/// Population variance (divide by the row length) of each row.
pub fn variance_per_channel(x: &Matrix) -> Vec<f64> {
    let means = mean_per_channel(x);
    means
        .iter()
        .enumerate()
        .map(|(r, &mu)| {
            x.row(r).iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / x.cols() as f64
        })
        .collect()
}
