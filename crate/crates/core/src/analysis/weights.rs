use serde::{Deserialize, Serialize};

use crate::model::ModelParams;

/// The regression-head weight matrix with axis labels, ready for heatmap
/// rendering by an external tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrixExport {
    pub rows: usize,
    pub cols: usize,
    pub row_axis: String,
    pub col_axis: String,
    /// `data[t][l]` is the weight from input timestep `t` to horizon step `l`.
    pub data: Vec<Vec<f64>>,
}

/// Emit the trend regression weights (input length x horizon).
pub fn export_weight_matrix(params: &ModelParams) -> WeightMatrixExport {
    let w = &params.w_reg;
    let data = (0..w.rows()).map(|r| w.row(r).to_vec()).collect();
    WeightMatrixExport {
        rows: w.rows(),
        cols: w.cols(),
        row_axis: "input_timestep".to_string(),
        col_axis: "horizon_step".to_string(),
        data,
    }
}

/// Mean |diagonal| vs mean |off-diagonal| of a square export; a trained
/// copy task should be diagonally dominant.
pub fn diagonal_dominance(export: &WeightMatrixExport) -> (f64, f64) {
    let mut diag_sum = 0.0;
    let mut diag_n = 0usize;
    let mut off_sum = 0.0;
    let mut off_n = 0usize;
    for (r, row) in export.data.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if r == c {
                diag_sum += v.abs();
                diag_n += 1;
            } else {
                off_sum += v.abs();
                off_n += 1;
            }
        }
    }
    (diag_sum / diag_n.max(1) as f64, off_sum / off_n.max(1) as f64)
}
