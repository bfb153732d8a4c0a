mod commands;
mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{AnalyzeMode, Ctx};
use config::Overrides;

/// Config-driven runner for the MLP-IConv forecaster: training, evaluation,
/// hyperparameter grids, ablations, analyses, and synthetic data generation.
#[derive(Parser)]
#[command(name = "iconv-cli", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; flags below override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed (overrides [train].seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: runs/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Dataset name or CSV path (overrides [data].dataset).
    #[arg(long, global = true)]
    dataset: Option<String>,

    /// Forecast horizon (overrides [data].horizon).
    #[arg(long, global = true)]
    horizon: Option<usize>,

    /// Directory searched for bare dataset names (besides $ICONV_DATA_DIR
    /// and ./data).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model: split, standardize, optimize, checkpoint.
    Train,
    /// Evaluate a checkpoint on the test split (MSE/MAE).
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train/evaluate every (kernel set, multiplier, horizon) combination.
    Grid,
    /// Train the full model and both ablations on identical splits and seed.
    Ablate,
    /// Post-hoc analyses over a checkpoint.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// rf = receptive field, weights = regression matrix,
        /// forecast = per-layer decomposition of one window.
        #[arg(long, value_enum)]
        mode: AnalyzeMode,
    },
    /// Compare the matmul and 1x1-convolution mixer formulations.
    Bench {
        #[arg(long, default_value_t = 8)]
        channels: usize,
        #[arg(long, default_value_t = 4)]
        multiplier: usize,
        #[arg(long, default_value_t = 22)]
        hidden_len: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Generate a synthetic dataset in the standard CSV format.
    Synth {
        /// Where to write the CSV (default: <out>/synth.csv).
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval { .. } => "eval",
            Command::Grid => "grid",
            Command::Ablate => "ablate",
            Command::Analyze { .. } => "analyze",
            Command::Bench { .. } => "bench",
            Command::Synth { .. } => "synth",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides {
        dataset: cli.dataset.clone(),
        seed: cli.seed,
        horizon: cli.horizon,
    };
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cli.command.name()));
    let ctx = Ctx { out_dir, data_dir: cli.data_dir.clone(), quiet: cli.quiet };
    match cli.command {
        Command::Train => commands::cmd_train(cfg, &ctx),
        Command::Eval { checkpoint } => commands::cmd_eval(cfg, &ctx, &checkpoint),
        Command::Grid => commands::cmd_grid(cfg, &ctx),
        Command::Ablate => commands::cmd_ablate(cfg, &ctx),
        Command::Analyze { checkpoint, mode } => {
            commands::cmd_analyze(cfg, &ctx, &checkpoint, mode)
        }
        Command::Bench { channels, multiplier, hidden_len, repeats } => {
            commands::cmd_bench(cfg, &ctx, channels, multiplier, hidden_len, repeats)
        }
        Command::Synth { out_file } => commands::cmd_synth(cfg, &ctx, out_file.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
