use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward_batch, revin_denormalize, IConvConfig, ModelParams};
use crate::numerics::{Matrix, Mode};

/// All series needed to plot one channel's forecast decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelForecast {
    pub channel: usize,
    pub channel_name: String,
    /// Length T.
    pub input: Vec<f64>,
    /// Length L; absent when no target was supplied.
    pub truth: Option<Vec<f64>>,
    /// Denormalized trend, length L.
    pub trend: Vec<f64>,
    /// Trend on the normalized scale, length L (for reconstruction).
    pub trend_norm: Vec<f64>,
    /// One correction per IConv layer, normalized scale, each length L.
    pub corrections: Vec<Vec<f64>>,
    /// Final prediction, length L.
    pub prediction: Vec<f64>,
}

/// Forecast decomposition of a single window: input, truth, the trend, every
/// layer's local-variation correction, and the final prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastExport {
    pub input_len: usize,
    pub horizon: usize,
    pub revin_mean: Vec<f64>,
    pub revin_var: Vec<f64>,
    pub channels: Vec<ChannelForecast>,
}

/// Run one eval-mode forward pass and emit every intermediate series.
pub fn export_forecast(
    params: &ModelParams,
    config: &IConvConfig,
    x: &Matrix,
    y: Option<&Matrix>,
) -> Result<ForecastExport> {
    if let Some(truth) = y {
        if truth.shape() != (config.channels, config.horizon) {
            return Err(Error::Shape(format!(
                "truth is {:?}, expected {:?}",
                truth.shape(),
                (config.channels, config.horizon)
            )));
        }
    }
    let trace = forward_batch(std::slice::from_ref(x), params, config, Mode::Eval)?;
    let revin = &trace.revin[0];
    let trend_denorm = revin_denormalize(&trace.trend[0], revin)?;
    let mut channels = Vec::with_capacity(config.channels);
    for c in 0..config.channels {
        channels.push(ChannelForecast {
            channel: c,
            channel_name: format!("ch{c}"),
            input: x.row(c).to_vec(),
            truth: y.map(|t| t.row(c).to_vec()),
            trend: trend_denorm.row(c).to_vec(),
            trend_norm: trace.trend[0].row(c).to_vec(),
            corrections: trace.layers.iter().map(|lt| lt.v[0].row(c).to_vec()).collect(),
            prediction: trace.y_hat[0].row(c).to_vec(),
        });
    }
    Ok(ForecastExport {
        input_len: config.input_len,
        horizon: config.horizon,
        revin_mean: revin.mean.clone(),
        revin_var: revin.var.clone(),
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, variance_gate, Ablation, InitScheme, RevinState};
    use crate::numerics::Rng;

    fn config(ablation: Ablation) -> IConvConfig {
        let mut cfg = IConvConfig::new(2, 24, 12).with_ablation(ablation);
        cfg.kernel_sizes = vec![6, 4, 2];
        cfg.stride = 2;
        cfg.multiplier = 2;
        cfg.d_model = 8;
        cfg
    }

    fn random_window(cfg: &IConvConfig, seed: u64) -> (Matrix, Matrix) {
        let mut rng = Rng::new(seed);
        let mut x = Matrix::zeros(cfg.channels, cfg.input_len);
        for v in x.data_mut() {
            *v = rng.normal(0.0, 1.0) + rng.uniform();
        }
        let mut y = Matrix::zeros(cfg.channels, cfg.horizon);
        for v in y.data_mut() {
            *v = rng.normal(0.0, 1.0);
        }
        (x, y)
    }

    #[test]
    fn no_iconv_export_has_no_corrections() {
        let cfg = config(Ablation::NoIconv);
        let params = init_params(&cfg, &mut Rng::new(1), InitScheme::Normal001).unwrap();
        let (x, y) = random_window(&cfg, 2);
        let export = export_forecast(&params, &cfg, &x, Some(&y)).unwrap();
        for ch in &export.channels {
            assert!(ch.corrections.is_empty());
            assert_eq!(ch.prediction, ch.trend);
        }
    }

    #[test]
    fn record_lengths_match_contract() {
        let cfg = config(Ablation::Full);
        let params = init_params(&cfg, &mut Rng::new(3), InitScheme::Normal001).unwrap();
        let (x, y) = random_window(&cfg, 4);
        let export = export_forecast(&params, &cfg, &x, Some(&y)).unwrap();
        assert_eq!(export.channels.len(), 2);
        for ch in &export.channels {
            assert_eq!(ch.input.len(), cfg.input_len);
            assert_eq!(ch.truth.as_ref().unwrap().len(), cfg.horizon);
            assert_eq!(ch.trend.len(), cfg.horizon);
            assert_eq!(ch.prediction.len(), cfg.horizon);
            assert_eq!(ch.corrections.len(), 3);
            for corr in &ch.corrections {
                assert_eq!(corr.len(), cfg.horizon);
            }
        }
    }

    #[test]
    fn iterative_reconstruction_matches_prediction() {
        let cfg = config(Ablation::Full);
        let params = init_params(&cfg, &mut Rng::new(5), InitScheme::Normal001).unwrap();
        let (x, _) = random_window(&cfg, 6);
        let export = export_forecast(&params, &cfg, &x, None).unwrap();

        // Replay: start from the normalized trend, apply each correction
        // through the variance gate, denormalize, compare.
        let mut cur = Matrix::zeros(cfg.channels, cfg.horizon);
        for (c, ch) in export.channels.iter().enumerate() {
            cur.row_mut(c).copy_from_slice(&ch.trend_norm);
        }
        for layer in 0..3 {
            let mut v = Matrix::zeros(cfg.channels, cfg.horizon);
            for (c, ch) in export.channels.iter().enumerate() {
                v.row_mut(c).copy_from_slice(&ch.corrections[layer]);
            }
            cur = variance_gate(&cur, &v, cfg.scale_by_std);
        }
        let state = RevinState {
            mean: export.revin_mean.clone(),
            var: export.revin_var.clone(),
            epsilon: cfg.revin_epsilon,
        };
        let denorm = crate::model::revin_denormalize(&cur, &state).unwrap();
        for (c, ch) in export.channels.iter().enumerate() {
            for (l, &p) in ch.prediction.iter().enumerate() {
                assert!((denorm.get(c, l) - p).abs() < 1e-10);
            }
        }
    }
}
