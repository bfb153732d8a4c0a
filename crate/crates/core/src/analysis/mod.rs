//! Post-hoc analyses over trained parameters: receptive-field gradients,
//! regression-weight export, the mixer formulation benchmark, and forecast
//! decomposition exports.

mod bench;
mod forecast;
mod receptive_field;
mod weights;

pub use bench::{icm_equivalence_bench, IcmBenchReport, ICM_EQUIVALENCE_BOUND};
pub use forecast::{export_forecast, ChannelForecast, ForecastExport};
pub use receptive_field::{min_max_scale, receptive_field, GradientMode, ReceptiveField};
pub use weights::{diagonal_dominance, export_weight_matrix, WeightMatrixExport};
