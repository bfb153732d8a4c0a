use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use iconv_core::analysis::{
    export_forecast, export_weight_matrix, icm_equivalence_bench, receptive_field, GradientMode,
};
use iconv_core::data::{
    chronological_split, load_csv, standardize, synth_generate, windows, write_csv, Dataset,
    SplitRanges, SplitRatios, SynthRecipe, WindowSpec,
};
use iconv_core::model::{init_params, Ablation, Checkpoint, IConvConfig};
use iconv_core::numerics::Rng;
use iconv_core::train::{evaluate, train, TrainConfig, TrainOutcome};

use crate::config::{resolve_dataset_path, RunConfig};

pub struct Ctx {
    pub out_dir: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub quiet: bool,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// Loaded, split, standardized dataset ready for windowing.
struct Prepared {
    dataset: Dataset,
    name: String,
}

impl Prepared {
    fn ranges_for(&self, cfg: &RunConfig, horizon: usize) -> Result<SplitRanges> {
        let ratios = SplitRatios {
            train: cfg.data.split.train,
            val: cfg.data.split.val,
            test: cfg.data.split.test,
        };
        Ok(chronological_split(
            self.dataset.rows,
            ratios,
            cfg.data.input_len,
            horizon,
            cfg.data.cap_rows,
        )?)
    }
}

fn prepare(cfg: &RunConfig, ctx: &Ctx) -> Result<Prepared> {
    let path = resolve_dataset_path(&cfg.data.dataset, ctx.data_dir.as_deref())?;
    let raw = load_csv(&path)?.with_frequency(cfg.data.frequency);
    ctx.info(format!(
        "loaded {} ({} rows x {} channels)",
        path.display(),
        raw.rows,
        raw.channels
    ));
    // Standardization statistics always come from the train rows.
    let ratios = SplitRatios {
        train: cfg.data.split.train,
        val: cfg.data.split.val,
        test: cfg.data.split.test,
    };
    let ranges = chronological_split(
        raw.rows,
        ratios,
        cfg.data.input_len,
        cfg.data.horizon,
        cfg.data.cap_rows,
    )?;
    let (dataset, _) = standardize(&raw, ranges.train.clone())?;
    let name = raw.name.clone();
    Ok(Prepared { dataset, name })
}

fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn run_training(
    cfg: &RunConfig,
    prepared: &Prepared,
    model_cfg: &IConvConfig,
    seed: u64,
) -> Result<(TrainOutcome, f64, f64)> {
    let ranges = prepared.ranges_for(cfg, model_cfg.horizon)?;
    let spec = WindowSpec::new(model_cfg.input_len, model_cfg.horizon)?;
    let train_w = windows(&prepared.dataset, ranges.train.clone(), spec);
    let val_w = windows(&prepared.dataset, ranges.val.clone(), spec);
    let test_w = windows(&prepared.dataset, ranges.test.clone(), spec);
    let params = init_params(model_cfg, &mut Rng::new(seed), cfg.model.init)?;
    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    let outcome = train(params, model_cfg, &train_w, &val_w, &tcfg)?;
    let (mse, mae) = evaluate(&outcome.params, model_cfg, &test_w)?;
    Ok((outcome, mse, mae))
}

fn checkpoint_for(
    cfg: &RunConfig,
    prepared: &Prepared,
    model_cfg: &IConvConfig,
    outcome: &TrainOutcome,
    seed: u64,
) -> Checkpoint {
    Checkpoint::new(model_cfg.clone(), outcome.params.clone(), seed)
        .with_metadata("dataset", &prepared.name)
        .with_metadata("init_scheme", cfg.model.init.as_str())
        .with_metadata("ablation", model_cfg.ablation.as_str())
        .with_metadata("best_epoch", outcome.best_epoch)
        .with_metadata("best_val_mae", format!("{:.17e}", outcome.best_val_mae))
        .with_metadata("epochs_run", outcome.history.len())
        .with_metadata("canonical_stride", model_cfg.is_canonical_stride())
}

pub fn cmd_train(cfg: RunConfig, ctx: &Ctx) -> Result<()> {
    let prepared = prepare(&cfg, ctx)?;
    let model_cfg = cfg.model_config(prepared.dataset.channels);
    model_cfg.validate()?;
    if !model_cfg.is_canonical_stride() {
        eprintln!(
            "warning: stride {} is outside the canonical {{3, 4}} grid",
            model_cfg.stride
        );
    }
    cfg.write(&ctx.out_dir)?;
    let seed = cfg.train.seed;
    let (outcome, mse, mae) = run_training(&cfg, &prepared, &model_cfg, seed)?;

    let ckpt_path = ctx.out_dir.join("checkpoint.json");
    checkpoint_for(&cfg, &prepared, &model_cfg, &outcome, seed).save(&ckpt_path)?;
    write_ndjson(&ctx.out_dir.join("history.ndjson"), &outcome.history)?;
    for rec in &outcome.history {
        ctx.info(format!(
            "epoch {:>2}  train_loss {:.6}  val_mae {:.6}  lr {:.2e}  {:.1}s",
            rec.epoch, rec.train_loss, rec.val_mae, rec.lr, rec.seconds
        ));
    }
    ctx.info(format!(
        "best epoch {} (val MAE {:.6}); test MSE {:.6} MAE {:.6}",
        outcome.best_epoch, outcome.best_val_mae, mse, mae
    ));
    ctx.info(format!("checkpoint written to {}", ckpt_path.display()));
    Ok(())
}

#[derive(Serialize)]
struct MetricsRecord {
    dataset: String,
    horizon: usize,
    mse: f64,
    mae: f64,
}

pub fn cmd_eval(cfg: RunConfig, ctx: &Ctx, checkpoint: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let prepared = prepare(&cfg, ctx)?;
    if ckpt.config.horizon != cfg.data.horizon {
        bail!(
            "horizon mismatch: checkpoint was trained for {}, run config asks for {}",
            ckpt.config.horizon,
            cfg.data.horizon
        );
    }
    if ckpt.config.channels != prepared.dataset.channels {
        bail!(
            "channel mismatch: checkpoint has {}, dataset has {}",
            ckpt.config.channels,
            prepared.dataset.channels
        );
    }
    cfg.write(&ctx.out_dir)?;
    let ranges = prepared.ranges_for(&cfg, ckpt.config.horizon)?;
    let spec = WindowSpec::new(ckpt.config.input_len, ckpt.config.horizon)?;
    let test_w = windows(&prepared.dataset, ranges.test.clone(), spec);
    let (mse, mae) = evaluate(&ckpt.params, &ckpt.config, &test_w)?;
    let record = MetricsRecord {
        dataset: prepared.name.clone(),
        horizon: ckpt.config.horizon,
        mse,
        mae,
    };
    let path = ctx.out_dir.join("metrics.json");
    std::fs::write(&path, serde_json::to_vec(&record)?)?;
    println!("test MSE {mse:.6}  MAE {mae:.6}  ({} windows)", test_w.len());
    ctx.info(format!("metrics written to {}", path.display()));
    Ok(())
}

#[derive(Serialize, Clone)]
struct GridRow {
    kernel_set: Vec<usize>,
    multiplier: usize,
    horizon: usize,
    status: String,
    mse: Option<f64>,
    mae: Option<f64>,
    epochs_run: Option<usize>,
    error: Option<String>,
}

pub fn cmd_grid(cfg: RunConfig, ctx: &Ctx) -> Result<()> {
    let prepared = prepare(&cfg, ctx)?;
    cfg.write(&ctx.out_dir)?;
    let mut rows: Vec<GridRow> = Vec::new();
    for kernel_set in &cfg.grid.kernel_sets {
        for &multiplier in &cfg.grid.multipliers {
            for &horizon in &cfg.grid.horizons {
                let mut model_cfg = cfg.model_config(prepared.dataset.channels);
                model_cfg.kernel_sizes = kernel_set.clone();
                model_cfg.multiplier = multiplier;
                model_cfg.horizon = horizon;
                let cell = model_cfg
                    .validate()
                    .map_err(anyhow::Error::from)
                    .and_then(|()| run_training(&cfg, &prepared, &model_cfg, cfg.train.seed));
                match cell {
                    Ok((outcome, mse, mae)) => rows.push(GridRow {
                        kernel_set: kernel_set.clone(),
                        multiplier,
                        horizon,
                        status: "ok".into(),
                        mse: Some(mse),
                        mae: Some(mae),
                        epochs_run: Some(outcome.history.len()),
                        error: None,
                    }),
                    Err(err) => {
                        eprintln!(
                            "grid cell P={kernel_set:?} M={multiplier} L={horizon} failed: {err:#}"
                        );
                        rows.push(GridRow {
                            kernel_set: kernel_set.clone(),
                            multiplier,
                            horizon,
                            status: "failed".into(),
                            mse: None,
                            mae: None,
                            epochs_run: None,
                            error: Some(format!("{err:#}")),
                        });
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.kernel_set, a.multiplier, a.horizon).cmp(&(&b.kernel_set, b.multiplier, b.horizon))
    });
    write_ndjson(&ctx.out_dir.join("grid.ndjson"), &rows)?;

    // MAE table: one block per kernel set, horizons down, multipliers across.
    for kernel_set in &cfg.grid.kernel_sets {
        println!("kernel set {kernel_set:?} (MAE)");
        print!("{:>8}", "L");
        for m in &cfg.grid.multipliers {
            print!("{:>10}", format!("M={m}"));
        }
        println!();
        for &horizon in &cfg.grid.horizons {
            print!("{horizon:>8}");
            for &multiplier in &cfg.grid.multipliers {
                let cell = rows.iter().find(|r| {
                    &r.kernel_set == kernel_set
                        && r.multiplier == multiplier
                        && r.horizon == horizon
                });
                match cell.and_then(|r| r.mae) {
                    Some(mae) => print!("{mae:>10.4}"),
                    None => print!("{:>10}", "failed"),
                }
            }
            println!();
        }
    }
    ctx.info(format!("{} grid rows written to grid.ndjson", rows.len()));
    Ok(())
}

#[derive(Serialize)]
struct AblateRow {
    variant: String,
    horizon: usize,
    mse: f64,
    mae: f64,
    iconv_params: usize,
    epochs_run: usize,
}

pub fn cmd_ablate(cfg: RunConfig, ctx: &Ctx) -> Result<()> {
    let prepared = prepare(&cfg, ctx)?;
    cfg.write(&ctx.out_dir)?;
    let mut rows = Vec::new();
    for &horizon in &cfg.grid.horizons {
        for ablation in [Ablation::Full, Ablation::NoIcm, Ablation::NoIconv] {
            let mut model_cfg = cfg.model_config(prepared.dataset.channels);
            model_cfg.horizon = horizon;
            model_cfg.ablation = ablation;
            model_cfg.validate()?;
            let (outcome, mse, mae) = run_training(&cfg, &prepared, &model_cfg, cfg.train.seed)?;
            rows.push(AblateRow {
                variant: ablation.as_str().into(),
                horizon,
                mse,
                mae,
                iconv_params: outcome.params.n_iconv_params(),
                epochs_run: outcome.history.len(),
            });
        }
    }
    write_ndjson(&ctx.out_dir.join("ablate.ndjson"), &rows)?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>14}", "L", "variant", "MSE", "MAE", "iconv_params");
    for row in &rows {
        println!(
            "{:>8} {:>10} {:>10.4} {:>10.4} {:>14}",
            row.horizon, row.variant, row.mse, row.mae, row.iconv_params
        );
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AnalyzeMode {
    Rf,
    Weights,
    Forecast,
}

pub fn cmd_analyze(cfg: RunConfig, ctx: &Ctx, checkpoint: &Path, mode: AnalyzeMode) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    cfg.write(&ctx.out_dir)?;
    match mode {
        AnalyzeMode::Weights => {
            let export = export_weight_matrix(&ckpt.params);
            write_ndjson(&ctx.out_dir.join("weights.ndjson"), &[export])?;
            ctx.info("regression weight matrix written to weights.ndjson");
        }
        AnalyzeMode::Rf => {
            let prepared = prepare(&cfg, ctx)?;
            let ranges = prepared.ranges_for(&cfg, ckpt.config.horizon)?;
            let spec = WindowSpec::new(ckpt.config.input_len, ckpt.config.horizon)?;
            let val_w = windows(&prepared.dataset, ranges.val.clone(), spec);
            if val_w.is_empty() {
                bail!("validation split yields no windows for the receptive-field analysis");
            }
            // Seeded sample of validation windows.
            let mut order: Vec<usize> = (0..val_w.len()).collect();
            Rng::new(cfg.train.seed).shuffle(&mut order);
            let take = cfg.analysis.n_samples.min(order.len());
            if take < cfg.analysis.n_samples {
                eprintln!(
                    "warning: only {take} validation windows available, requested {}",
                    cfg.analysis.n_samples
                );
            }
            let inputs: Vec<_> = order[..take].iter().map(|&i| val_w.input(i)).collect();
            let grad_mode = match cfg.analysis.rf_mode.as_str() {
                "averaged_input" => GradientMode::AveragedInput,
                "per_sample" => GradientMode::PerSample,
                other => bail!("unknown rf_mode '{other}' (averaged_input | per_sample)"),
            };
            let rf = receptive_field(
                &ckpt.params,
                &ckpt.config,
                &inputs,
                cfg.analysis.n_samples,
                cfg.analysis.target_index,
                grad_mode,
                &prepared.name,
            )?;
            write_ndjson(&ctx.out_dir.join("rf.ndjson"), &[rf])?;
            ctx.info("receptive field written to rf.ndjson");
        }
        AnalyzeMode::Forecast => {
            let prepared = prepare(&cfg, ctx)?;
            let ranges = prepared.ranges_for(&cfg, ckpt.config.horizon)?;
            let spec = WindowSpec::new(ckpt.config.input_len, ckpt.config.horizon)?;
            let test_w = windows(&prepared.dataset, ranges.test.clone(), spec);
            if test_w.is_empty() {
                bail!("test split yields no windows for the forecast export");
            }
            let idx = cfg.analysis.window_index.min(test_w.len() - 1);
            let (x, y) = test_w.get(idx);
            let export = export_forecast(&ckpt.params, &ckpt.config, &x, Some(&y))?;
            // One meta line, then one line per channel.
            let meta = serde_json::json!({
                "record": "meta",
                "dataset": prepared.name,
                "window_index": idx,
                "input_len": export.input_len,
                "horizon": export.horizon,
                "revin_mean": export.revin_mean,
                "revin_var": export.revin_var,
            });
            let path = ctx.out_dir.join("forecast.ndjson");
            let file = File::create(&path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            let mut out = BufWriter::new(file);
            serde_json::to_writer(&mut out, &meta)?;
            out.write_all(b"\n")?;
            for ch in &export.channels {
                let mut value = serde_json::to_value(ch)?;
                value["record"] = serde_json::Value::String("channel".into());
                serde_json::to_writer(&mut out, &value)?;
                out.write_all(b"\n")?;
            }
            ctx.info(format!("forecast decomposition written to {}", path.display()));
        }
    }
    Ok(())
}

pub fn cmd_bench(
    cfg: RunConfig,
    ctx: &Ctx,
    channels: usize,
    multiplier: usize,
    hidden_len: usize,
    repeats: usize,
) -> Result<()> {
    cfg.write(&ctx.out_dir)?;
    let report = icm_equivalence_bench(channels, multiplier, hidden_len, cfg.train.seed, repeats)?;
    write_ndjson(&ctx.out_dir.join("bench.ndjson"), &[report.clone()])?;
    println!(
        "mixer formulations {} (max |diff| {:.3e}, bound 1e-9)",
        if report.equivalent { "EQUIVALENT" } else { "NOT EQUIVALENT" },
        report.max_abs_diff
    );
    if let (Some(mm), Some(cv)) = (report.matmul_median_secs, report.conv_median_secs) {
        println!(
            "median over {} runs: matmul {:.3e}s, 1x1 conv {:.3e}s ({:.1}% ratio)",
            report.repeats,
            mm,
            cv,
            100.0 * mm / cv
        );
    }
    if !report.equivalent {
        bail!("formulations diverged: max |diff| {:.3e}", report.max_abs_diff);
    }
    Ok(())
}

pub fn cmd_synth(cfg: RunConfig, ctx: &Ctx, out_file: Option<&Path>) -> Result<()> {
    cfg.write(&ctx.out_dir)?;
    let mut recipe = match cfg.synth.recipe.as_str() {
        "local_variation" => SynthRecipe::local_variation(cfg.synth.channels),
        "trend_only" => SynthRecipe::trend_only(),
        other => bail!("unknown recipe '{other}' (local_variation | trend_only)"),
    };
    if let Some(noise) = &cfg.synth.noise_std {
        recipe.noise_std = noise.clone();
    }
    let dataset = synth_generate(cfg.synth.channels, cfg.synth.length, cfg.train.seed, &recipe);
    let default_path = ctx.out_dir.join("synth.csv");
    let path = out_file.unwrap_or(&default_path);
    write_csv(&dataset, path)?;
    println!(
        "wrote {} ({} rows x {} channels, seed {})",
        path.display(),
        dataset.rows,
        dataset.channels,
        cfg.train.seed
    );
    Ok(())
}
