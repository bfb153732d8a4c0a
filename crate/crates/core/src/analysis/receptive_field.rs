use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{backward_batch, forward_batch, IConvConfig, ModelParams};
use crate::numerics::{Matrix, Mode};

/// How input sensitivities are aggregated across samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Average the sampled inputs over samples and channels first, run the
    /// model on that single averaged window, then differentiate. The default.
    AveragedInput,
    /// Differentiate each sample's own prediction, then average the
    /// per-sample gradients.
    PerSample,
}

/// Normalized sensitivity of a mid-horizon output to each input timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceptiveField {
    /// Min-max scaled to [0, 1]; length T.
    pub gradients: Vec<f64>,
    /// Gradients before scaling.
    pub raw_gradients: Vec<f64>,
    pub sample_count: usize,
    pub requested_samples: usize,
    pub target_index: usize,
    pub mode: GradientMode,
    pub source: String,
}

/// Min-max scale to [0, 1]. A constant vector has no range and maps to all
/// zeros.
pub fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !range.is_finite() || range == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - min) / range).collect()
}

fn grad_of_mean_mid_output(
    params: &ModelParams,
    config: &IConvConfig,
    x: &Matrix,
    target_index: usize,
) -> Result<Vec<f64>> {
    let trace = forward_batch(std::slice::from_ref(x), params, config, Mode::Eval)?;
    let mut seed = Matrix::zeros(config.channels, config.horizon);
    let weight = 1.0 / config.channels as f64;
    for c in 0..config.channels {
        seed.set(c, target_index, weight);
    }
    let grads = backward_batch(params, config, &trace, &[seed])?;
    // A shared perturbation of timestep t moves every channel, so channel
    // gradients sum.
    let d = &grads.input[0];
    let mut out = vec![0.0; config.input_len];
    for c in 0..config.channels {
        for (acc, &g) in out.iter_mut().zip(d.row(c)) {
            *acc += g;
        }
    }
    Ok(out)
}

/// Gradient-based receptive field: the sensitivity of the averaged
/// `target_index` forecast step to each input timestep, over up to
/// `n_samples` windows, min-max scaled to [0, 1]. `target_index` defaults to
/// the horizon midpoint. When fewer windows are available than requested,
/// all of them are used and the counts are recorded.
pub fn receptive_field(
    params: &ModelParams,
    config: &IConvConfig,
    inputs: &[Matrix],
    n_samples: usize,
    target_index: Option<usize>,
    mode: GradientMode,
    source: &str,
) -> Result<ReceptiveField> {
    if inputs.is_empty() {
        return Err(Error::Config("receptive field needs at least one input window".into()));
    }
    let target = target_index.unwrap_or(config.horizon / 2);
    if target >= config.horizon {
        return Err(Error::Config(format!(
            "target index {target} outside horizon {}",
            config.horizon
        )));
    }
    let used = n_samples.min(inputs.len()).max(1);
    let sample = &inputs[..used];

    let raw = match mode {
        GradientMode::AveragedInput => {
            // X_G[t]: mean over samples and channels; the model then runs on
            // a window whose every channel is X_G.
            let t_len = config.input_len;
            let mut x_g = vec![0.0; t_len];
            for x in sample {
                for c in 0..config.channels {
                    for (acc, &v) in x_g.iter_mut().zip(x.row(c)) {
                        *acc += v;
                    }
                }
            }
            let denom = (used * config.channels) as f64;
            for v in &mut x_g {
                *v /= denom;
            }
            let mut replicated = Matrix::zeros(config.channels, t_len);
            for c in 0..config.channels {
                replicated.row_mut(c).copy_from_slice(&x_g);
            }
            grad_of_mean_mid_output(params, config, &replicated, target)?
        }
        GradientMode::PerSample => {
            let mut acc = vec![0.0; config.input_len];
            for x in sample {
                let g = grad_of_mean_mid_output(params, config, x, target)?;
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += v;
                }
            }
            for v in &mut acc {
                *v /= used as f64;
            }
            acc
        }
    };

    Ok(ReceptiveField {
        gradients: min_max_scale(&raw),
        raw_gradients: raw,
        sample_count: used,
        requested_samples: n_samples,
        target_index: target,
        mode,
        source: source.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, Ablation, IConvConfig, InitScheme};
    use crate::numerics::Rng;

    fn linear_config() -> IConvConfig {
        let mut cfg = IConvConfig::new(3, 16, 16).with_ablation(Ablation::NoIconv);
        cfg.d_model = 4;
        cfg.kernel_sizes = vec![4, 2, 1];
        cfg.stride = 2;
        cfg.multiplier = 1;
        cfg
    }

    fn random_windows(cfg: &IConvConfig, n: usize, seed: u64) -> Vec<Matrix> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|_| {
                let mut x = Matrix::zeros(cfg.channels, cfg.input_len);
                for v in x.data_mut() {
                    *v = rng.normal(0.0, 1.0) + rng.uniform();
                }
                x
            })
            .collect()
    }

    #[test]
    fn min_max_scaling_properties() {
        assert_eq!(min_max_scale(&[2.0, 2.0, 2.0]), vec![0.0, 0.0, 0.0]);
        let scaled = min_max_scale(&[1.0, 3.0, 2.0]);
        assert_eq!(scaled, vec![0.0, 1.0, 0.5]);
        // Idempotent on non-constant vectors.
        assert_eq!(min_max_scale(&scaled), scaled);
    }

    #[test]
    fn input_ignoring_model_scales_to_zeros() {
        // All weights and biases zero: the prediction reduces to the stored
        // per-channel mean, so every timestep contributes equally and the
        // degenerate-range rule zeroes the scaled output.
        let cfg = linear_config();
        let mut params = init_params(&cfg, &mut Rng::new(1), InitScheme::Normal001).unwrap();
        params.visit_trainable_mut(|name, slice| {
            if !name.contains("bn.gamma") {
                slice.fill(0.0);
            }
        });
        let inputs = random_windows(&cfg, 4, 2);
        let rf = receptive_field(
            &params,
            &cfg,
            &inputs,
            4,
            None,
            GradientMode::AveragedInput,
            "test",
        )
        .unwrap();
        let spread = rf
            .raw_gradients
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - rf.raw_gradients.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread.abs() < 1e-15, "raw gradients not constant: {spread}");
        assert!(rf.gradients.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_model_matches_closed_form_jacobian() {
        // Zero encoder, zero regression bias: the map from input to
        // prediction is linear with Jacobian
        //   dY[c,mid]/dx[t] = W[t,mid] - mean_s W[s,mid] + 1/T
        // (the last two terms come from the instance normalization).
        let cfg = linear_config();
        let mut rng = Rng::new(7);
        let mut params = init_params(&cfg, &mut rng, InitScheme::Normal001).unwrap();
        params.visit_trainable_mut(|name, slice| {
            if name.starts_with("enc") || name == "b_reg" {
                slice.fill(0.0);
            }
        });
        let inputs = random_windows(&cfg, 6, 8);
        let rf = receptive_field(
            &params,
            &cfg,
            &inputs,
            6,
            None,
            GradientMode::AveragedInput,
            "test",
        )
        .unwrap();
        let mid = cfg.horizon / 2;
        let t_len = cfg.input_len;
        let col_mean: f64 =
            (0..t_len).map(|t| params.w_reg.get(t, mid)).sum::<f64>() / t_len as f64;
        for t in 0..t_len {
            let expected = params.w_reg.get(t, mid) - col_mean + 1.0 / t_len as f64;
            let got = rf.raw_gradients[t];
            assert!((got - expected).abs() < 1e-8, "t={t}: {got} vs {expected}");
        }
    }

    #[test]
    fn identity_regression_concentrates_on_target_index() {
        let cfg = linear_config();
        let mut params = init_params(&cfg, &mut Rng::new(3), InitScheme::Normal001).unwrap();
        params.visit_trainable_mut(|name, slice| {
            if !name.contains("bn.gamma") {
                slice.fill(0.0);
            }
        });
        for i in 0..cfg.input_len {
            params.w_reg.set(i, i, 1.0);
        }
        let inputs = random_windows(&cfg, 3, 4);
        let rf = receptive_field(
            &params,
            &cfg,
            &inputs,
            3,
            None,
            GradientMode::AveragedInput,
            "test",
        )
        .unwrap();
        let mid = cfg.horizon / 2;
        let max_idx = rf
            .gradients
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(max_idx, mid);
        assert!((rf.gradients[mid] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_output_attains_zero_and_one() {
        let cfg = linear_config();
        let params = init_params(&cfg, &mut Rng::new(5), InitScheme::Normal001).unwrap();
        let inputs = random_windows(&cfg, 5, 6);
        let rf = receptive_field(
            &params,
            &cfg,
            &inputs,
            5,
            None,
            GradientMode::PerSample,
            "test",
        )
        .unwrap();
        let min = rf.gradients.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = rf.gradients.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(min, 0.0);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn fewer_windows_than_requested_uses_all() {
        let cfg = linear_config();
        let params = init_params(&cfg, &mut Rng::new(9), InitScheme::Normal001).unwrap();
        let inputs = random_windows(&cfg, 3, 10);
        let rf = receptive_field(
            &params,
            &cfg,
            &inputs,
            50,
            None,
            GradientMode::AveragedInput,
            "test",
        )
        .unwrap();
        assert_eq!(rf.sample_count, 3);
        assert_eq!(rf.requested_samples, 50);
    }
}
