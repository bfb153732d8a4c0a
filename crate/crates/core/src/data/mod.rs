//! Dataset ingestion, chronological splitting, train-statistics
//! standardization, sliding-window sampling, and synthetic series generation.

mod dataset;
mod split;
mod standardize;
mod synth;
mod windows;

pub use dataset::{load_csv, write_csv, Dataset, Frequency};
pub use split::{chronological_split, SplitRanges, SplitRatios};
pub use standardize::{standardize, Standardizer};
pub use synth::{synth_generate, SynthRecipe, Wave};
pub use windows::{windows, WindowSet, WindowSpec};
