use crate::error::{Error, Result};
use crate::numerics::{Matrix, Tensor3};

/// Mean absolute error over batch, channels, and time.
pub fn l1_loss(y_hat: &Tensor3, y: &Tensor3) -> Result<f64> {
    if y_hat.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "l1_loss on {:?} vs {:?}",
            y_hat.shape(),
            y.shape()
        )));
    }
    let n = y_hat.data().len();
    if n == 0 {
        return Err(Error::Config("l1_loss on empty tensors".into()));
    }
    let sum: f64 = y_hat.data().iter().zip(y.data()).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(sum / n as f64)
}

/// L1 loss over a batch of prediction/target matrices plus its gradient with
/// respect to the predictions: `sign(y_hat - y) / count` elementwise.
pub fn l1_loss_and_grad(y_hat: &[Matrix], y: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    if y_hat.len() != y.len() {
        return Err(Error::Shape(format!(
            "l1 batch sizes differ: {} vs {}",
            y_hat.len(),
            y.len()
        )));
    }
    let mut count = 0usize;
    for (a, b) in y_hat.iter().zip(y) {
        if a.shape() != b.shape() {
            return Err(Error::Shape(format!(
                "l1 instance shapes differ: {:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
        count += a.data().len();
    }
    if count == 0 {
        return Err(Error::Config("l1_loss on an empty batch".into()));
    }
    let inv = 1.0 / count as f64;
    let mut sum = 0.0;
    let mut grads = Vec::with_capacity(y_hat.len());
    for (a, b) in y_hat.iter().zip(y) {
        let mut g = Matrix::zeros(a.rows(), a.cols());
        for ((d, &p), &t) in g.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
            let diff = p - t;
            sum += diff.abs();
            *d = if diff > 0.0 {
                inv
            } else if diff < 0.0 {
                -inv
            } else {
                0.0
            };
        }
        grads.push(g);
    }
    Ok((sum * inv, grads))
}

/// Squared and absolute error accumulator for metric evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct MetricAccumulator {
    sq_sum: f64,
    abs_sum: f64,
    count: usize,
}

impl MetricAccumulator {
    pub fn update(&mut self, y_hat: &Matrix, y: &Matrix) {
        debug_assert_eq!(y_hat.shape(), y.shape());
        for (&a, &b) in y_hat.data().iter().zip(y.data()) {
            let d = a - b;
            self.sq_sum += d * d;
            self.abs_sum += d.abs();
            self.count += 1;
        }
    }

    /// `(mse, mae)` over everything seen so far.
    pub fn finish(&self) -> (f64, f64) {
        if self.count == 0 {
            return (0.0, 0.0);
        }
        let n = self.count as f64;
        (self.sq_sum / n, self.abs_sum / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(vals: &[f64]) -> Tensor3 {
        let m = Matrix::from_vec(1, vals.len(), vals.to_vec()).unwrap();
        Tensor3::from_matrices(&[m]).unwrap()
    }

    #[test]
    fn identical_inputs_give_zero() {
        let a = t3(&[1.0, -2.0, 3.0]);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn unit_offset_gives_one() {
        let a = t3(&[1.0, 2.0, 3.0]);
        let b = t3(&[0.0, 1.0, 2.0]);
        assert_eq!(l1_loss(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn hand_case() {
        let a = t3(&[0.0, 2.0]);
        let b = t3(&[1.0, 0.0]);
        assert_eq!(l1_loss(&a, &b).unwrap(), 1.5);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = t3(&[0.0, 2.0]);
        let b = t3(&[1.0]);
        assert!(l1_loss(&a, &b).is_err());
    }

    #[test]
    fn symmetry() {
        let a = t3(&[0.3, -1.2, 4.0]);
        let b = t3(&[-0.5, 0.0, 2.5]);
        assert_eq!(l1_loss(&a, &b).unwrap(), l1_loss(&b, &a).unwrap());
    }

    #[test]
    fn grad_signs_and_scale() {
        let a = vec![Matrix::from_vec(1, 2, vec![0.0, 2.0]).unwrap()];
        let b = vec![Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap()];
        let (loss, g) = l1_loss_and_grad(&a, &b).unwrap();
        assert_eq!(loss, 1.5);
        assert_eq!(g[0].data(), &[-0.5, 0.5]);
    }

    #[test]
    fn metrics_constant_offset() {
        let mut acc = MetricAccumulator::default();
        let a = Matrix::from_vec(1, 3, vec![2.0, 2.0, 2.0]).unwrap();
        let b = Matrix::zeros(1, 3);
        acc.update(&a, &b);
        let (mse, mae) = acc.finish();
        assert_eq!(mse, 4.0);
        assert_eq!(mae, 2.0);
    }
}
