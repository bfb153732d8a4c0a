//! Shared test oracles: naive reference implementations kept independent of
//! the production kernels they validate.

use iconv_core::numerics::{Matrix, Rng};

/// Triple-loop grouped cross-correlation, gather form.
pub fn naive_grouped_conv(
    x: &Matrix,
    kernels: &Matrix,
    biases: &[f64],
    multiplier: usize,
    stride: usize,
) -> Matrix {
    let channels = x.rows();
    let p = kernels.cols();
    let n = (x.cols() - p) / stride + 1;
    let mut out = Matrix::zeros(channels * multiplier, n);
    for c in 0..channels {
        for f in 0..multiplier {
            let row = c * multiplier + f;
            for pos in 0..n {
                let mut acc = biases[row];
                for k in 0..p {
                    acc += kernels.get(row, k) * x.get(c, pos * stride + k);
                }
                out.set(row, pos, acc);
            }
        }
    }
    out
}

/// Triple-loop grouped transposed convolution, gather form: for every output
/// position, sum the kernel windows that cover it.
pub fn naive_grouped_trconv(
    h: &Matrix,
    kernels: &Matrix,
    biases: &[f64],
    multiplier: usize,
    stride: usize,
) -> Matrix {
    let channels = h.rows() / multiplier;
    let p = kernels.cols();
    let n = h.cols();
    let l = (n - 1) * stride + p;
    let mut out = Matrix::zeros(channels, l);
    for c in 0..channels {
        for t in 0..l {
            let mut acc = biases[c];
            for pos in 0..n {
                let start = pos * stride;
                if t >= start && t < start + p {
                    let k = t - start;
                    let mut partial = 0.0;
                    for f in 0..multiplier {
                        let row = c * multiplier + f;
                        partial += kernels.get(row, k) * h.get(row, pos);
                    }
                    acc += partial;
                }
            }
            out.set(c, t, acc);
        }
    }
    out
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.normal(0.0, 1.0);
    }
    m
}

/// Frobenius inner product.
pub fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).sum()
}
