use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{icm_forward, icm_forward_conv1x1, IcmParams};
use crate::numerics::{Matrix, Rng};

/// Tolerance for the two mixer formulations to count as equivalent.
pub const ICM_EQUIVALENCE_BOUND: f64 = 1e-9;

/// Outcome of the matmul-vs-1x1-convolution comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcmBenchReport {
    pub channels: usize,
    pub multiplier: usize,
    pub hidden_len: usize,
    pub repeats: usize,
    pub max_abs_diff: f64,
    pub equivalent: bool,
    /// Median wall time per forward pass; absent when `repeats` is zero.
    pub matmul_median_secs: Option<f64>,
    pub conv_median_secs: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Run both mixer formulations on identical N(0, 0.01)-initialized weights
/// and a shared random input, report the worst output discrepancy, and time
/// each route (single-threaded, one warm-up, median of `repeats`).
pub fn icm_equivalence_bench(
    channels: usize,
    multiplier: usize,
    hidden_len: usize,
    seed: u64,
    repeats: usize,
) -> Result<IcmBenchReport> {
    if channels == 0 || multiplier == 0 || hidden_len == 0 {
        return Err(Error::Config(
            "channels, multiplier and hidden length must be positive".into(),
        ));
    }
    let mut rng = Rng::new(seed);
    let cm = channels * multiplier;
    let mut icm = IcmParams {
        w_cr: Matrix::zeros(channels, cm),
        b_cr: vec![0.0; channels],
        w_ce: Matrix::zeros(cm, channels),
        b_ce: vec![0.0; cm],
    };
    for v in icm.w_cr.data_mut() {
        *v = rng.normal(0.0, 0.01);
    }
    for v in icm.w_ce.data_mut() {
        *v = rng.normal(0.0, 0.01);
    }
    let mut h = Matrix::zeros(cm, hidden_len);
    for v in h.data_mut() {
        *v = rng.normal(0.0, 1.0);
    }

    let a = icm_forward(&h, &icm)?;
    let b = icm_forward_conv1x1(&h, &icm)?;
    let max_abs_diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max);
    let equivalent = max_abs_diff <= ICM_EQUIVALENCE_BOUND;

    let (matmul_median_secs, conv_median_secs) = if repeats > 0 {
        let _ = icm_forward(&h, &icm)?; // warm-up
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t0 = Instant::now();
            let out = icm_forward(&h, &icm)?;
            times.push(t0.elapsed().as_secs_f64());
            std::hint::black_box(out);
        }
        let matmul_t = median(times);
        let _ = icm_forward_conv1x1(&h, &icm)?;
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t0 = Instant::now();
            let out = icm_forward_conv1x1(&h, &icm)?;
            times.push(t0.elapsed().as_secs_f64());
            std::hint::black_box(out);
        }
        (Some(matmul_t), Some(median(times)))
    } else {
        (None, None)
    };

    Ok(IcmBenchReport {
        channels,
        multiplier,
        hidden_len,
        repeats,
        max_abs_diff,
        equivalent,
        matmul_median_secs,
        conv_median_secs,
    })
}
