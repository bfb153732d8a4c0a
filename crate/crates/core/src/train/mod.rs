//! Optimization: L1 objective, Adam with bias correction, per-epoch LR decay,
//! validation-driven early stopping, and MSE/MAE evaluation.

mod adam;
mod loss;

pub use adam::{adam_step, lr_schedule, AdamState};
pub use loss::{l1_loss, l1_loss_and_grad, MetricAccumulator};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::model::{backward_batch, forward_batch, IConvConfig, ModelParams};
use crate::numerics::{Matrix, Mode, Rng};

/// Training protocol knobs. Defaults: 10 epochs, Adam at 0.001, early-stop
/// patience 3, batch 32, learning rate halved every epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub patience: usize,
    pub batch_size: usize,
    pub scheduler_gamma: f64,
    pub seed: u64,
    /// Optional global gradient max-norm clip.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 0.001,
            patience: 3,
            batch_size: 32,
            scheduler_gamma: 0.5,
            seed: 1,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.lr)));
        }
        if !(self.scheduler_gamma.is_finite() && self.scheduler_gamma > 0.0) {
            return Err(Error::Config(format!(
                "invalid scheduler gamma {}",
                self.scheduler_gamma
            )));
        }
        Ok(())
    }
}

/// One line of the training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub lr: f64,
    pub seconds: f64,
}

/// Validation-MAE early stopping: snapshot on improvement, stop after
/// `patience` consecutive non-improving epochs.
#[derive(Clone, Debug)]
pub struct EarlyStop {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_improve: usize,
}

impl EarlyStop {
    pub fn new(patience: usize) -> Self {
        EarlyStop { patience, best: f64::INFINITY, best_epoch: 0, since_improve: 0 }
    }

    /// Record an epoch's validation MAE. Returns `(improved, should_stop)`.
    pub fn observe(&mut self, epoch: usize, val_mae: f64) -> (bool, bool) {
        if val_mae < self.best {
            self.best = val_mae;
            self.best_epoch = epoch;
            self.since_improve = 0;
            (true, false)
        } else {
            self.since_improve += 1;
            (false, self.since_improve >= self.patience)
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Result of a training run: the lowest-validation-MAE parameters and the
/// per-epoch history.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_val_mae: f64,
    pub best_epoch: usize,
}

fn clip_gradients(grads: &mut ModelParams, max_norm: f64) {
    let flat = grads.flatten();
    let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grads.visit_trainable_mut(|_, slice| {
            for v in slice {
                *v *= scale;
            }
        });
    }
}

/// Train `params` on `train_windows`, validating with MAE after every epoch.
/// Mini-batches are drawn in a seeded shuffled order; the best-validation
/// snapshot is returned together with the full history.
pub fn train(
    mut params: ModelParams,
    config: &IConvConfig,
    train_windows: &WindowSet,
    val_windows: &WindowSet,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    config.validate()?;
    if train_windows.is_empty() {
        return Err(Error::Config("train split yields no windows".into()));
    }
    if val_windows.is_empty() {
        return Err(Error::Config("validation split yields no windows".into()));
    }

    // Decouple the shuffle stream from the weight-init stream.
    let mut shuffle_rng = Rng::new(tcfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut adam = AdamState::new(params.n_trainable());
    let mut stopper = EarlyStop::new(tcfg.patience);
    let mut best_params = params.clone();
    let mut history = Vec::new();
    let mut indices: Vec<usize> = (0..train_windows.len()).collect();

    for epoch in 1..=tcfg.epochs {
        let started = Instant::now();
        let lr = lr_schedule(epoch, tcfg.lr, tcfg.scheduler_gamma);
        shuffle_rng.shuffle(&mut indices);

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for chunk in indices.chunks(tcfg.batch_size) {
            let mut xs = Vec::with_capacity(chunk.len());
            let mut ys = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (x, y) = train_windows.get(i);
                xs.push(x);
                ys.push(y);
            }
            let trace = forward_batch(&xs, &params, config, Mode::Train)?;
            for (layer, lt) in params.layers.iter_mut().zip(&trace.layers) {
                layer.bn.update_running(&lt.bn.stats, config.bn_momentum);
            }
            let (loss, d_yhat) = l1_loss_and_grad(&trace.y_hat, &ys)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss became {loss} at epoch {epoch} after {} steps; \
                     aborting (try a lower learning rate)",
                    adam.step_count()
                )));
            }
            let elems = chunk.len();
            loss_sum += loss * elems as f64;
            loss_count += elems;
            let mut grads = backward_batch(&params, config, &trace, &d_yhat)?;
            if let Some(max_norm) = tcfg.grad_clip {
                clip_gradients(&mut grads.params, max_norm);
            }
            adam_step(&mut params, &grads.params, &mut adam, lr)?;
        }
        let train_loss = loss_sum / loss_count as f64;

        let (_, val_mae) = evaluate(&params, config, val_windows)?;
        let seconds = started.elapsed().as_secs_f64();
        history.push(EpochRecord { epoch, train_loss, val_mae, lr, seconds });

        let (improved, stop) = stopper.observe(epoch, val_mae);
        if improved {
            best_params = params.clone();
        }
        if stop {
            break;
        }
    }

    Ok(TrainOutcome {
        params: best_params,
        history,
        best_val_mae: stopper.best(),
        best_epoch: stopper.best_epoch(),
    })
}

const EVAL_BATCH: usize = 256;

/// MSE and MAE of eval-mode forecasts over a window set, averaged across all
/// windows, channels, and horizon steps (on the standardized data scale).
pub fn evaluate(
    params: &ModelParams,
    config: &IConvConfig,
    windows: &WindowSet,
) -> Result<(f64, f64)> {
    let mut acc = MetricAccumulator::default();
    let mut idx = 0;
    while idx < windows.len() {
        let end = (idx + EVAL_BATCH).min(windows.len());
        let mut xs: Vec<Matrix> = Vec::with_capacity(end - idx);
        let mut ys: Vec<Matrix> = Vec::with_capacity(end - idx);
        for i in idx..end {
            let (x, y) = windows.get(i);
            xs.push(x);
            ys.push(y);
        }
        let trace = forward_batch(&xs, params, config, Mode::Eval)?;
        for (y_hat, y) in trace.y_hat.iter().zip(&ys) {
            acc.update(y_hat, y);
        }
        idx = end;
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, windows, SynthRecipe, WindowSpec};
    use crate::model::{init_params, InitScheme};

    fn tiny_config() -> IConvConfig {
        let mut cfg = IConvConfig::new(2, 24, 12);
        cfg.kernel_sizes = vec![6, 4, 2];
        cfg.stride = 2;
        cfg.multiplier = 2;
        cfg.d_model = 8;
        cfg
    }

    #[test]
    fn early_stop_example() {
        // Patience 3, monotonically worsening after epoch 1: stop after
        // epoch 4 with epoch-1 weights.
        let mut es = EarlyStop::new(3);
        assert_eq!(es.observe(1, 1.0), (true, false));
        assert_eq!(es.observe(2, 1.1), (false, false));
        assert_eq!(es.observe(3, 1.2), (false, false));
        assert_eq!(es.observe(4, 1.3), (false, true));
        assert_eq!(es.best_epoch(), 1);
    }

    #[test]
    fn zero_lr_changes_nothing() {
        // no_iconv keeps batch norm out of the picture, so per-window losses
        // cannot drift with batch composition across shuffled epochs.
        let cfg = tiny_config().with_ablation(crate::model::Ablation::NoIconv);
        let ds = synth_generate(2, 200, 3, &SynthRecipe::local_variation(2));
        let spec = WindowSpec::new(24, 12).unwrap();
        let train_w = windows(&ds, 0..150, spec);
        let val_w = windows(&ds, 126..200, spec);
        let params = init_params(&cfg, &mut Rng::new(4), InitScheme::Normal001).unwrap();
        let before = params.flatten();
        let tcfg = TrainConfig { epochs: 3, lr: 0.0, batch_size: 16, ..Default::default() };
        let out = train(params, &cfg, &train_w, &val_w, &tcfg).unwrap();
        assert_eq!(out.params.flatten(), before);
        let l0 = out.history[0].train_loss;
        for rec in &out.history {
            assert!((rec.train_loss - l0).abs() < 1e-12 * l0.abs().max(1.0));
        }
    }

    #[test]
    fn loss_decreases_on_learnable_data() {
        let cfg = tiny_config();
        let mut recipe = SynthRecipe::local_variation(2);
        recipe.noise_std = vec![0.02];
        let ds = synth_generate(2, 400, 5, &recipe);
        let spec = WindowSpec::new(24, 12).unwrap();
        let train_w = windows(&ds, 0..300, spec);
        let val_w = windows(&ds, 276..400, spec);
        let params = init_params(&cfg, &mut Rng::new(6), InitScheme::Normal001).unwrap();
        let tcfg = TrainConfig { epochs: 3, patience: 10, ..Default::default() };
        let out = train(params, &cfg, &train_w, &val_w, &tcfg).unwrap();
        assert!(out.history.len() == 3);
        assert!(
            out.history[2].train_loss < out.history[0].train_loss,
            "loss did not decrease: {:?}",
            out.history.iter().map(|r| r.train_loss).collect::<Vec<_>>()
        );
    }

    #[test]
    fn returned_params_hit_best_recorded_val_mae() {
        let cfg = tiny_config();
        let ds = synth_generate(2, 300, 8, &SynthRecipe::local_variation(2));
        let spec = WindowSpec::new(24, 12).unwrap();
        let train_w = windows(&ds, 0..220, spec);
        let val_w = windows(&ds, 196..300, spec);
        let params = init_params(&cfg, &mut Rng::new(9), InitScheme::Normal001).unwrap();
        let tcfg = TrainConfig { epochs: 4, ..Default::default() };
        let out = train(params, &cfg, &train_w, &val_w, &tcfg).unwrap();
        let best_in_history =
            out.history.iter().map(|r| r.val_mae).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_mae, best_in_history);
        let (_, recomputed) = evaluate(&out.params, &cfg, &val_w).unwrap();
        assert_eq!(recomputed, out.best_val_mae);
    }

    #[test]
    fn seeded_determinism() {
        let cfg = tiny_config();
        let ds = synth_generate(2, 250, 11, &SynthRecipe::local_variation(2));
        let spec = WindowSpec::new(24, 12).unwrap();
        let train_w = windows(&ds, 0..180, spec);
        let val_w = windows(&ds, 156..250, spec);
        let tcfg = TrainConfig { epochs: 2, ..Default::default() };
        let run = || {
            let params = init_params(&cfg, &mut Rng::new(12), InitScheme::Normal001).unwrap();
            train(params, &cfg, &train_w, &val_w, &tcfg).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.params, b.params);
        let hist_a: Vec<(f64, f64)> =
            a.history.iter().map(|r| (r.train_loss, r.val_mae)).collect();
        let hist_b: Vec<(f64, f64)> =
            b.history.iter().map(|r| (r.train_loss, r.val_mae)).collect();
        assert_eq!(hist_a, hist_b);
    }

    #[test]
    fn empty_split_is_a_config_error() {
        let cfg = tiny_config();
        let ds = synth_generate(2, 100, 1, &SynthRecipe::trend_only());
        let spec = WindowSpec::new(24, 12).unwrap();
        let empty = windows(&ds, 0..10, spec);
        let val_w = windows(&ds, 0..100, spec);
        let params = init_params(&cfg, &mut Rng::new(1), InitScheme::Normal001).unwrap();
        let err = train(params, &cfg, &empty, &val_w, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn perfect_predictor_evaluates_to_zero() {
        // Persistence-configured model on constant data predicts exactly.
        let cfg = tiny_config().with_ablation(crate::model::Ablation::NoIconv);
        let mut params = init_params(&cfg, &mut Rng::new(2), InitScheme::Normal001).unwrap();
        params.visit_trainable_mut(|name, slice| {
            if !name.contains("bn.gamma") {
                slice.fill(0.0);
            }
        });
        for l in 0..cfg.horizon {
            params.w_reg.set(cfg.input_len - 1, l, 1.0);
        }
        let mut recipe = SynthRecipe::trend_only();
        recipe.trend_slope = 0.0;
        recipe.trend_waves.clear(); // constant series
        let ds = synth_generate(2, 100, 1, &recipe);
        let spec = WindowSpec::new(24, 12).unwrap();
        let w = windows(&ds, 0..100, spec);
        let (mse, mae) = evaluate(&params, &cfg, &w).unwrap();
        assert!(mse < 1e-20 && mae < 1e-10, "mse {mse} mae {mae}");
    }
}
