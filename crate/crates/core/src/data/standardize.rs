use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

/// Per-channel z-score statistics fitted on the train split. Constant
/// channels keep std 1 and are flagged instead of dividing by zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(dataset: &Dataset, train_rows: Range<usize>) -> Result<Self> {
        if train_rows.is_empty() || train_rows.end > dataset.rows {
            return Err(Error::Config(format!(
                "cannot fit standardizer on rows {train_rows:?} of a {}-row dataset",
                dataset.rows
            )));
        }
        let n = train_rows.len() as f64;
        let c_count = dataset.channels;
        let mut mean = vec![0.0; c_count];
        let mut std = vec![0.0; c_count];
        let mut constant = vec![false; c_count];
        for c in 0..c_count {
            let mut sum = 0.0;
            for r in train_rows.clone() {
                sum += dataset.value(r, c);
            }
            mean[c] = sum / n;
            let mut sq = 0.0;
            for r in train_rows.clone() {
                let d = dataset.value(r, c) - mean[c];
                sq += d * d;
            }
            let var = sq / n;
            if var > 0.0 {
                std[c] = var.sqrt();
            } else {
                std[c] = 1.0;
                constant[c] = true;
            }
        }
        Ok(Standardizer { mean, std, constant })
    }

    /// Transform every row of a dataset in place.
    pub fn apply(&self, dataset: &mut Dataset) {
        for r in 0..dataset.rows {
            for c in 0..dataset.channels {
                let v = dataset.value(r, c);
                *dataset.value_mut(r, c) = (v - self.mean[c]) / self.std[c];
            }
        }
    }

    /// Undo [`apply`].
    pub fn invert(&self, dataset: &mut Dataset) {
        for r in 0..dataset.rows {
            for c in 0..dataset.channels {
                let v = dataset.value(r, c);
                *dataset.value_mut(r, c) = v * self.std[c] + self.mean[c];
            }
        }
    }
}

/// Standardize all splits with statistics from the train rows, returning the
/// transformed dataset and the fitted statistics. Metrics downstream are
/// reported on this standardized scale.
pub fn standardize(dataset: &Dataset, train_rows: Range<usize>) -> Result<(Dataset, Standardizer)> {
    let stats = Standardizer::fit(dataset, train_rows)?;
    let mut out = dataset.clone();
    stats.apply(&mut out);
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::Frequency;

    fn toy_dataset(values: Vec<f64>, channels: usize) -> Dataset {
        let rows = values.len() / channels;
        Dataset {
            name: "toy".into(),
            channels,
            rows,
            values,
            frequency: Frequency::Unknown,
            timestamps: (0..rows).map(|r| format!("r{r}")).collect(),
            channel_names: (0..channels).map(|c| format!("c{c}")).collect(),
        }
    }

    #[test]
    fn train_split_becomes_zero_mean_unit_std() {
        let ds = toy_dataset(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 2);
        let (out, _) = standardize(&ds, 0..4).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = (0..4).map(|r| out.value(r, c)).collect();
            let mean = vals.iter().sum::<f64>() / 4.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_channel_is_flagged_and_centered() {
        let ds = toy_dataset(vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0], 2);
        let (out, stats) = standardize(&ds, 0..3).unwrap();
        assert!(stats.constant[0]);
        assert_eq!(stats.std[0], 1.0);
        for r in 0..3 {
            assert_eq!(out.value(r, 0), 0.0);
        }
    }

    #[test]
    fn inverse_restores_originals() {
        let ds = toy_dataset(vec![1.5, -2.0, 0.25, 8.0, -3.5, 4.0], 2);
        let (mut out, stats) = standardize(&ds, 0..2).unwrap();
        stats.invert(&mut out);
        for (&a, &b) in out.values.iter().zip(&ds.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
