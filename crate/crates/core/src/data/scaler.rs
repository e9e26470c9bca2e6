use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use crate::error::{bail, Result};
use crate::math::sqrt;
use crate::matrix::Matrix;

/// Standard deviations below this are treated as zero variance.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-feature centering and scaling. Discrete columns carry `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Fits mean and population standard deviation on continuous columns.
pub fn fit_scaler(ds: &TabularDataset) -> ScalerParams {
    let n = ds.row_count();
    let mut means = Vec::with_capacity(ds.n_features());
    let mut stds = Vec::with_capacity(ds.n_features());
    for (j, col) in ds.feature_columns().enumerate() {
        if !col.kind.is_continuous() || n == 0 {
            means.push(0.0);
            stds.push(1.0);
            continue;
        }
        let mean = ds.features().iter_rows().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = ds
            .features()
            .iter_rows()
            .map(|r| (r[j] - mean) * (r[j] - mean))
            .sum::<f64>()
            / n as f64;
        let sd = sqrt(var);
        means.push(mean);
        stds.push(if sd < STD_FLOOR { 1.0 } else { sd });
    }
    ScalerParams { means, stds }
}

impl ScalerParams {
    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(row).zip(&self.means).zip(&self.stds) {
            *o = (v - m) / s;
        }
    }

    pub fn inverse_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(row).zip(&self.means).zip(&self.stds) {
            *o = v * s + m;
        }
    }

    pub fn transform_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.means.len() {
            bail!(
                Shape,
                "scaler fitted on {} columns, got {}",
                self.means.len(),
                m.cols()
            );
        }
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            self.transform_row(m.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    pub fn inverse_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.means.len() {
            bail!(
                Shape,
                "scaler fitted on {} columns, got {}",
                self.means.len(),
                m.cols()
            );
        }
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            self.inverse_row(m.row(i), out.row_mut(i));
        }
        Ok(out)
    }
}

/// `(raw - mean) / std` on every feature column; discrete columns pass through.
pub fn apply_scaler(ds: &TabularDataset, params: &ScalerParams) -> Result<TabularDataset> {
    let scaled = params.transform_matrix(ds.features())?;
    ds.with_features(scaled)
}
