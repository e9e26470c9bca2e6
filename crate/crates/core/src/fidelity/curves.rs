use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{exp, powi, quantile_sorted, sort_floats, sqrt};

/// Empirical CDF as a step curve at the sorted unique values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    pub values: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl EcdfCurve {
    /// `P(X <= x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }
}

pub fn ecdf(values: &[f64]) -> Result<EcdfCurve> {
    if values.is_empty() {
        bail!(Domain, "ECDF of an empty sample");
    }
    let mut sorted = values.to_vec();
    sort_floats(&mut sorted);
    let n = sorted.len() as f64;
    let mut xs = Vec::new();
    let mut cs = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if i + 1 < sorted.len() && sorted[i + 1] == v {
            continue;
        }
        xs.push(v);
        cs.push((i + 1) as f64 / n);
    }
    // the last step is exactly one by construction of (n / n)
    Ok(EcdfCurve {
        values: xs,
        cumulative: cs,
    })
}

/// Gaussian kernel density estimate sampled on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

pub const KDE_GRID_POINTS: usize = 256;

/// Silverman's rule: `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, falling back to
/// whichever spread is non-zero, and to 1 for a constant sample.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let sd = sqrt(crate::math::variance(values) * n / (n - 1.0).max(1.0));
    let mut sorted = values.to_vec();
    sort_floats(&mut sorted);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return 1.0,
    };
    0.9 * spread * libm::pow(n, -0.2)
}

pub fn kde(values: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve> {
    if values.is_empty() {
        bail!(Domain, "KDE of an empty sample");
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => bail!(Domain, "bandwidth must be positive, got {h}"),
        None => silverman_bandwidth(values),
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * h * sqrt(2.0 * core::f64::consts::PI));
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let density = grid
        .iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| exp(-0.5 * powi((x - v) / h, 2)))
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
    })
}
