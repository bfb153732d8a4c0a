//! Run configuration: TOML file + command-line overrides, resolved to a
//! fully concrete config that is written next to every run's outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use iconv_core::data::Frequency;
use iconv_core::model::{Ablation, IConvConfig, InitScheme};
use iconv_core::train::TrainConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitSection {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataSection {
    /// Bare dataset name (resolved against --data-dir / ICONV_DATA_DIR /
    /// ./data) or an explicit CSV path.
    pub dataset: String,
    pub split: SplitSection,
    /// Use only the first N rows (benchmark conventions for the ETT files).
    pub cap_rows: Option<usize>,
    pub input_len: usize,
    pub horizon: usize,
    pub frequency: Frequency,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSection {
    pub d_model: usize,
    pub enc_blocks: usize,
    pub kernel_sizes: Vec<usize>,
    pub stride: usize,
    pub multiplier: usize,
    pub ablation: Ablation,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub revin_epsilon: f64,
    pub scale_by_std: bool,
    pub init: InitScheme,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSection {
    pub kernel_sets: Vec<Vec<usize>>,
    pub multipliers: Vec<usize>,
    pub horizons: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSection {
    pub channels: usize,
    pub length: usize,
    pub recipe: String,
    pub noise_std: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisSection {
    pub n_samples: usize,
    pub target_index: Option<usize>,
    pub rf_mode: String,
    pub window_index: usize,
}

/// Fully resolved run configuration. Serialized as `config.toml` next to the
/// outputs of every command; re-running from that file reproduces the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub grid: GridSection,
    pub synth: SynthSection,
    pub analysis: AnalysisSection,
}

// Raw (partial) representation of the TOML file: everything optional.

#[derive(Clone, Debug, Default, Deserialize)]
struct RawConfig {
    #[serde(default)]
    data: RawData,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    synth: RawSynth,
    #[serde(default)]
    analysis: RawAnalysis,
}

#[derive(Clone, Debug, Default, Deserialize)]
struct RawData {
    dataset: Option<String>,
    split: Option<SplitSection>,
    cap_rows: Option<usize>,
    input_len: Option<usize>,
    horizon: Option<usize>,
    frequency: Option<Frequency>,
}

#[derive(Clone, Debug, Default, Deserialize)]
struct RawModel {
    d_model: Option<usize>,
    enc_blocks: Option<usize>,
    kernel_sizes: Option<Vec<usize>>,
    stride: Option<usize>,
    multiplier: Option<usize>,
    ablation: Option<Ablation>,
    bn_momentum: Option<f64>,
    bn_epsilon: Option<f64>,
    revin_epsilon: Option<f64>,
    scale_by_std: Option<bool>,
    init: Option<InitScheme>,
}

#[derive(Clone, Debug, Default, Deserialize)]
struct RawTrain {
    epochs: Option<usize>,
    lr: Option<f64>,
    patience: Option<usize>,
    batch_size: Option<usize>,
    scheduler_gamma: Option<f64>,
    seed: Option<u64>,
    grad_clip: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
struct RawGrid {
    kernel_sets: Option<Vec<Vec<usize>>>,
    multipliers: Option<Vec<usize>>,
    horizons: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
struct RawSynth {
    channels: Option<usize>,
    length: Option<usize>,
    recipe: Option<String>,
    noise_std: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
struct RawAnalysis {
    n_samples: Option<usize>,
    target_index: Option<usize>,
    rf_mode: Option<String>,
    window_index: Option<usize>,
}

/// Benchmark conventions keyed by dataset name: split ratios, row caps,
/// sampling frequency, canonical stride.
struct DatasetPreset {
    split: SplitSection,
    cap_rows: Option<usize>,
    frequency: Frequency,
    stride: usize,
}

fn preset_for(name: &str) -> DatasetPreset {
    let six_two_two = SplitSection { train: 0.6, val: 0.2, test: 0.2 };
    let seven_one_two = SplitSection { train: 0.7, val: 0.1, test: 0.2 };
    let stem = Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    match stem.as_str() {
        "etth1" | "etth2" => DatasetPreset {
            split: six_two_two,
            cap_rows: Some(14_400),
            frequency: Frequency::Hourly,
            stride: 4,
        },
        "ettm1" | "ettm2" => DatasetPreset {
            split: six_two_two,
            cap_rows: Some(57_600),
            frequency: Frequency::Min15,
            stride: 4,
        },
        "solar" | "solar_energy" | "solar-energy" => DatasetPreset {
            split: seven_one_two,
            cap_rows: None,
            frequency: Frequency::Min10,
            stride: 3,
        },
        "weather" => DatasetPreset {
            split: seven_one_two,
            cap_rows: None,
            frequency: Frequency::Min10,
            stride: 3,
        },
        _ => DatasetPreset {
            split: seven_one_two,
            cap_rows: None,
            frequency: Frequency::Hourly,
            stride: 4,
        },
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dataset: Option<String>,
    pub seed: Option<u64>,
    pub horizon: Option<usize>,
}

pub fn load(config_path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let raw: RawConfig = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("malformed config file {}", path.display()))?
        }
        None => RawConfig::default(),
    };
    resolve(raw, overrides)
}

fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<RunConfig> {
    let dataset = overrides
        .dataset
        .clone()
        .or(raw.data.dataset)
        .unwrap_or_else(|| "synthetic".to_string());
    let preset = preset_for(&dataset);
    let horizon = overrides.horizon.or(raw.data.horizon).unwrap_or(96);
    let data = DataSection {
        dataset,
        split: raw.data.split.unwrap_or(preset.split),
        cap_rows: raw.data.cap_rows.or(preset.cap_rows),
        input_len: raw.data.input_len.unwrap_or(96),
        horizon,
        frequency: raw.data.frequency.unwrap_or(preset.frequency),
    };
    if data.input_len == 0 || data.horizon == 0 {
        bail!("input_len and horizon must be positive");
    }

    let model = ModelSection {
        d_model: raw.model.d_model.unwrap_or(128),
        enc_blocks: raw.model.enc_blocks.unwrap_or(1),
        kernel_sizes: raw.model.kernel_sizes.unwrap_or_else(|| vec![24, 16, 8]),
        stride: raw.model.stride.unwrap_or(preset.stride),
        multiplier: raw.model.multiplier.unwrap_or(4),
        ablation: raw.model.ablation.unwrap_or(Ablation::Full),
        bn_momentum: raw.model.bn_momentum.unwrap_or(0.1),
        bn_epsilon: raw.model.bn_epsilon.unwrap_or(1e-5),
        revin_epsilon: raw.model.revin_epsilon.unwrap_or(1e-5),
        scale_by_std: raw.model.scale_by_std.unwrap_or(false),
        init: raw.model.init.unwrap_or(InitScheme::Normal001),
    };

    let defaults = TrainConfig::default();
    let train = TrainConfig {
        epochs: raw.train.epochs.unwrap_or(defaults.epochs),
        lr: raw.train.lr.unwrap_or(defaults.lr),
        patience: raw.train.patience.unwrap_or(defaults.patience),
        batch_size: raw.train.batch_size.unwrap_or(defaults.batch_size),
        scheduler_gamma: raw.train.scheduler_gamma.unwrap_or(defaults.scheduler_gamma),
        seed: overrides.seed.or(raw.train.seed).unwrap_or(defaults.seed),
        grad_clip: raw.train.grad_clip,
    };

    let grid = GridSection {
        kernel_sets: raw
            .grid
            .kernel_sets
            .unwrap_or_else(|| vec![vec![12, 8, 4], vec![24, 16, 8], vec![36, 24, 12]]),
        multipliers: raw.grid.multipliers.unwrap_or_else(|| vec![3, 4, 6, 8]),
        horizons: raw.grid.horizons.unwrap_or_else(|| vec![horizon]),
    };

    let synth = SynthSection {
        channels: raw.synth.channels.unwrap_or(4),
        length: raw.synth.length.unwrap_or(1200),
        recipe: raw.synth.recipe.unwrap_or_else(|| "local_variation".to_string()),
        noise_std: raw.synth.noise_std,
    };

    let analysis = AnalysisSection {
        n_samples: raw.analysis.n_samples.unwrap_or(50),
        target_index: raw.analysis.target_index,
        rf_mode: raw.analysis.rf_mode.unwrap_or_else(|| "averaged_input".to_string()),
        window_index: raw.analysis.window_index.unwrap_or(0),
    };

    Ok(RunConfig { data, model, train, grid, synth, analysis })
}

impl RunConfig {
    /// Architecture config for a dataset with `channels` channels.
    pub fn model_config(&self, channels: usize) -> IConvConfig {
        IConvConfig {
            channels,
            input_len: self.data.input_len,
            horizon: self.data.horizon,
            d_model: self.model.d_model,
            enc_blocks: self.model.enc_blocks,
            kernel_sizes: self.model.kernel_sizes.clone(),
            stride: self.model.stride,
            multiplier: self.model.multiplier,
            ablation: self.model.ablation,
            bn_momentum: self.model.bn_momentum,
            bn_epsilon: self.model.bn_epsilon,
            revin_epsilon: self.model.revin_epsilon,
            scale_by_std: self.model.scale_by_std,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        let path = out_dir.join("config.toml");
        let text = toml::to_string_pretty(self).context("config serialization failed")?;
        std::fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Resolve a dataset name or path to a CSV file. Bare names are tried against
/// `--data-dir`, `$ICONV_DATA_DIR`, and `./data`.
pub fn resolve_dataset_path(name_or_path: &str, data_dir: Option<&Path>) -> Result<PathBuf> {
    let direct = PathBuf::from(name_or_path);
    if direct.is_file() {
        return Ok(direct);
    }
    let mut tried = vec![direct.display().to_string()];
    if direct.extension().is_none() {
        let file = format!("{name_or_path}.csv");
        let mut roots: Vec<PathBuf> = Vec::new();
        if let Some(dir) = data_dir {
            roots.push(dir.to_path_buf());
        }
        if let Ok(dir) = std::env::var("ICONV_DATA_DIR") {
            roots.push(PathBuf::from(dir));
        }
        roots.push(PathBuf::from("data"));
        for root in roots {
            let candidate = root.join(&file);
            if candidate.is_file() {
                return Ok(candidate);
            }
            tried.push(candidate.display().to_string());
        }
    }
    bail!("dataset not found; tried: {}", tried.join(", "))
}
