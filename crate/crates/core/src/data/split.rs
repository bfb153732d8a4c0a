use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chronological train/val/test proportions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const SIX_TWO_TWO: SplitRatios = SplitRatios { train: 0.6, val: 0.2, test: 0.2 };
    pub const SEVEN_ONE_TWO: SplitRatios = SplitRatios { train: 0.7, val: 0.1, test: 0.2 };

    pub fn validate(&self) -> Result<()> {
        if self.train <= 0.0 || self.val <= 0.0 || self.test <= 0.0 {
            return Err(Error::Config("split ratios must all be positive".into()));
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Contiguous row ranges for each split. The val and test ranges are extended
/// left by the input length so every timestep of their nominal span can be a
/// forecast target; target spans never overlap.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    /// Number of input windows of length `input_len` fitting in each range
    /// (`len - T + 1`), the usual "dataset size" bookkeeping.
    pub fn input_window_counts(&self, input_len: usize) -> (usize, usize, usize) {
        let count = |r: &Range<usize>| r.len().saturating_sub(input_len) + 1;
        (count(&self.train), count(&self.val), count(&self.test))
    }
}

/// Split `n_rows` chronologically by `ratios`. Nominal boundaries are
/// `floor(n * train)` and `floor(n * val)` rows with the remainder as test;
/// val/test then gain `input_len` rows of left context. `cap`, when given,
/// truncates the series first (some benchmark conventions use a fixed number
/// of rows rather than the whole file). Every resulting range must fit at
/// least one (input, horizon) window.
pub fn chronological_split(
    n_rows: usize,
    ratios: SplitRatios,
    input_len: usize,
    horizon: usize,
    cap: Option<usize>,
) -> Result<SplitRanges> {
    ratios.validate()?;
    let n = cap.map_or(n_rows, |c| c.min(n_rows));
    if n == 0 {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let n_train = (n as f64 * ratios.train).floor() as usize;
    let n_val = (n as f64 * ratios.val).floor() as usize;
    if n_train + n_val >= n {
        return Err(Error::Config(format!(
            "split of {n} rows leaves no test rows (train {n_train}, val {n_val})"
        )));
    }
    if input_len > n_train {
        return Err(Error::Config(format!(
            "input length {input_len} exceeds the {n_train}-row train split"
        )));
    }
    let ranges = SplitRanges {
        train: 0..n_train,
        val: (n_train - input_len)..(n_train + n_val),
        test: (n_train + n_val - input_len)..n,
    };
    let min_len = input_len + horizon;
    for (name, r) in [("train", &ranges.train), ("val", &ranges.val), ("test", &ranges.test)] {
        if r.len() < min_len {
            return Err(Error::Config(format!(
                "{name} split has {} rows, fewer than input {input_len} + horizon {horizon}",
                r.len()
            )));
        }
    }
    Ok(ranges)
}
