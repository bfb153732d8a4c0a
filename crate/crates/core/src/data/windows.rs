use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Input length and horizon of the forecasting task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub input_len: usize,
    pub horizon: usize,
}

impl WindowSpec {
    pub fn new(input_len: usize, horizon: usize) -> Result<Self> {
        if input_len == 0 || horizon == 0 {
            return Err(Error::Config("input length and horizon must be positive".into()));
        }
        Ok(WindowSpec { input_len, horizon })
    }
}

/// Stride-1 sliding (input, target) windows over a row range of a dataset.
/// The input covers `[t, t+T)`, the target `[t+T, t+T+L)`; the last target
/// ends at the range end.
#[derive(Clone, Debug)]
pub struct WindowSet<'a> {
    dataset: &'a Dataset,
    spec: WindowSpec,
    starts: Vec<usize>,
}

impl<'a> WindowSet<'a> {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn spec(&self) -> WindowSpec {
        self.spec
    }

    pub fn channels(&self) -> usize {
        self.dataset.channels
    }

    /// Materialize window `i` as (input C x T, target C x L).
    pub fn get(&self, i: usize) -> (Matrix, Matrix) {
        let start = self.starts[i];
        let x = self.dataset.window(start, self.spec.input_len);
        let y = self.dataset.window(start + self.spec.input_len, self.spec.horizon);
        (x, y)
    }

    pub fn input(&self, i: usize) -> Matrix {
        self.dataset.window(self.starts[i], self.spec.input_len)
    }

    /// Absolute row index where window `i`'s target begins.
    pub fn target_start(&self, i: usize) -> usize {
        self.starts[i] + self.spec.input_len
    }

    pub fn iter(&self) -> impl Iterator<Item = (Matrix, Matrix)> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// All windows whose (input, target) pair fits inside `range`. A range
/// shorter than `T + L` yields an empty set; callers surface the warning.
pub fn windows<'a>(dataset: &'a Dataset, range: Range<usize>, spec: WindowSpec) -> WindowSet<'a> {
    let needed = spec.input_len + spec.horizon;
    let starts: Vec<usize> = if range.end > dataset.rows || range.len() < needed {
        Vec::new()
    } else {
        (range.start..=range.end - needed).collect()
    };
    WindowSet { dataset, spec, starts }
}
