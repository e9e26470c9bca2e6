//! L1-penalized logistic regression by accelerated proximal gradient.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::classifiers::{design_matrix, DesignLayout};
use crate::data::TabularDataset;
use crate::error::{bail, Result};
use crate::math::{dot, exp, ln, sigmoid, sqrt};
use crate::matrix::Matrix;
use crate::metrics::confusion;
use crate::rng::{derive_seed, permutation, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub lambda: f64,
    pub epochs: usize,
    /// Gradient step; `None` uses `1 / L` with `L` the loss's Lipschitz bound.
    pub step_size: Option<f64>,
    pub tolerance: f64,
    /// Drives fold assignment during lambda selection.
    pub seed: u64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            epochs: 5_000,
            step_size: None,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Design-column names; categorical levels appear as `name=level`.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    /// Names with nonzero coefficients, largest magnitude first.
    pub selected: Vec<String>,
    pub lambda: f64,
    pub converged: bool,
    pub epochs_run: usize,
}

impl FeatureSelection {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }
}

/// `sign(z) * max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest eigenvalue of `[X 1]^T [X 1] / n` by power iteration.
fn lipschitz(design: &Matrix) -> f64 {
    let (n, p) = (design.rows(), design.cols());
    let mut v = vec![1.0 / sqrt((p + 1) as f64); p + 1];
    let mut eig = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; p + 1];
        for row in design.iter_rows() {
            let s = dot(row, &v[..p]) + v[p];
            for (o, x) in next.iter_mut().zip(row) {
                *o += s * x;
            }
            next[p] += s;
        }
        next.iter_mut().for_each(|x| *x /= n as f64);
        let norm = sqrt(next.iter().map(|x| x * x).sum());
        if norm == 0.0 {
            return 0.0;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let done = (norm - eig).abs() <= 1e-10 * norm;
        eig = norm;
        v = next;
        if done {
            break;
        }
    }
    0.25 * eig
}

fn gradient(design: &Matrix, y: &[f64], w: &[f64], b: f64) -> (Vec<f64>, f64) {
    let n = design.rows() as f64;
    let mut g = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &t) in design.iter_rows().zip(y) {
        let r = sigmoid(dot(row, w) + b) - t;
        for (gi, x) in g.iter_mut().zip(row) {
            *gi += r * x;
        }
        gb += r;
    }
    g.iter_mut().for_each(|v| *v /= n);
    (g, gb / n)
}

fn fit_design(
    design: &Matrix,
    y: &[f64],
    cfg: &LassoConfig,
) -> Result<(Vec<f64>, f64, bool, usize)> {
    if !(cfg.lambda >= 0.0) {
        bail!(Config, "lambda must be non-negative, got {}", cfg.lambda);
    }
    let step = match cfg.step_size {
        Some(s) if s > 0.0 => s,
        Some(s) => bail!(Config, "step size must be positive, got {s}"),
        None => 1.0 / lipschitz(design).max(1e-12),
    };
    let p = design.cols();
    let mut w = vec![0.0; p];
    let mut b =
        ln(y.iter().sum::<f64>().max(0.5) / (y.len() as f64 - y.iter().sum::<f64>()).max(0.5));
    let (mut yw, mut yb) = (w.clone(), b);
    let mut t = 1.0;
    for epoch in 0..cfg.epochs {
        let (g, gb) = gradient(design, y, &yw, yb);
        let next: Vec<f64> = yw
            .iter()
            .zip(&g)
            .map(|(v, gi)| soft_threshold(v - step * gi, step * cfg.lambda))
            .collect();
        let next_b = yb - step * gb;
        let change = next
            .iter()
            .zip(&w)
            .map(|(a, c)| (a - c).abs())
            .fold((next_b - b).abs(), f64::max);
        if !change.is_finite() {
            bail!(Numerical, "lasso diverged at epoch {epoch}");
        }
        // restart momentum when the step goes against it
        let against: f64 = next
            .iter()
            .zip(&w)
            .zip(&yw)
            .map(|((n, o), y)| (y - n) * (n - o))
            .sum::<f64>()
            + (yb - next_b) * (next_b - b);
        if against > 0.0 {
            t = 1.0;
        }
        let t_next = (1.0 + sqrt(1.0 + 4.0 * t * t)) / 2.0;
        let beta = (t - 1.0) / t_next;
        yw = next
            .iter()
            .zip(&w)
            .map(|(n, o)| n + beta * (n - o))
            .collect();
        yb = next_b + beta * (next_b - b);
        w = next;
        b = next_b;
        t = t_next;
        if change < cfg.tolerance {
            return Ok((w, b, true, epoch + 1));
        }
    }
    Ok((w, b, false, cfg.epochs))
}

/// Minimizes mean logistic loss plus `lambda * sum |w_j|` (bias unpenalized).
/// Features are expected to be standardized already.
pub fn fit_lasso_logistic(train: &TabularDataset, cfg: &LassoConfig) -> Result<FeatureSelection> {
    let [n0, n1] = train.class_counts();
    if n0 == 0 || n1 == 0 {
        bail!(Training, "lasso needs both classes (got {n0} / {n1})");
    }
    let layout = DesignLayout::new(&train.feature_schema());
    let design = design_matrix(&layout, train.features());
    let y: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();
    let (coefficients, bias, converged, epochs_run) = fit_design(&design, &y, cfg)?;
    let names = layout.names().to_vec();
    let mut order: Vec<usize> = (0..coefficients.len())
        .filter(|&j| coefficients[j] != 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        coefficients[b]
            .abs()
            .total_cmp(&coefficients[a].abs())
            .then(a.cmp(&b))
    });
    Ok(FeatureSelection {
        selected: order.iter().map(|&j| names[j].clone()).collect(),
        names,
        coefficients,
        bias,
        lambda: cfg.lambda,
        converged,
        epochs_run,
    })
}

/// Smallest lambda at which every coefficient is zero.
pub fn lambda_max(train: &TabularDataset) -> f64 {
    let layout = DesignLayout::new(&train.feature_schema());
    let design = design_matrix(&layout, train.features());
    let labels = train.labels();
    let ybar = labels.iter().map(|&l| l as f64).sum::<f64>() / labels.len() as f64;
    (0..design.cols())
        .map(|j| {
            let s: f64 = design
                .iter_rows()
                .zip(labels)
                .map(|(r, &l)| r[j] * (l as f64 - ybar))
                .sum();
            (s / design.rows() as f64).abs()
        })
        .fold(0.0, f64::max)
}

/// `count` values spaced evenly in log scale from `hi` down to `hi * ratio`.
pub fn log_grid(hi: f64, ratio: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    (0..count)
        .map(|i| hi * exp(ln(ratio) * i as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub grid: Vec<f64>,
    /// Mean held-out class-1 recall per grid value.
    pub recalls: Vec<f64>,
    pub nonzero: Vec<usize>,
    pub best: f64,
    pub selection: FeatureSelection,
}

/// Picks lambda from `grid` by stratified k-fold class-1 recall. Ties go to
/// the largest lambda that still keeps at least one coefficient.
pub fn select_lambda(
    train: &TabularDataset,
    grid: &[f64],
    folds: usize,
    cfg: &LassoConfig,
) -> Result<LambdaSelection> {
    if grid.is_empty() || folds < 2 {
        bail!(Config, "need a non-empty grid and at least 2 folds");
    }
    let mut fold_of = vec![0usize; train.row_count()];
    for class in 0..2u8 {
        let (_, idx) = train.class_rows(class);
        let order = permutation(
            idx.len(),
            &mut rng_from_seed(derive_seed(cfg.seed, class as u64)),
        );
        for (k, &o) in order.iter().enumerate() {
            fold_of[idx[o]] = k % folds;
        }
    }
    let mut recalls = Vec::with_capacity(grid.len());
    let mut nonzero = Vec::with_capacity(grid.len());
    let mut fits = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let c = LassoConfig {
            lambda,
            ..cfg.clone()
        };
        let mut total = 0.0;
        let mut counted = 0;
        for f in 0..folds {
            let tr: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] != f).collect();
            let te: Vec<usize> = (0..fold_of.len()).filter(|&i| fold_of[i] == f).collect();
            let test = train.subset(&te);
            if test.class_counts()[1] == 0 {
                continue;
            }
            let fit = fit_lasso_logistic(&train.subset(&tr), &c)?;
            let layout = DesignLayout::new(&train.feature_schema());
            let pred: Vec<u8> = test
                .features()
                .iter_rows()
                .map(|r| u8::from(sigmoid(layout.dot(r, &fit.coefficients) + fit.bias) > 0.5))
                .collect();
            let cm = confusion(&pred, test.labels(), 1)?;
            total += cm.tp as f64 / (cm.tp + cm.fn_) as f64;
            counted += 1;
        }
        recalls.push(if counted > 0 {
            total / counted as f64
        } else {
            0.0
        });
        let full = fit_lasso_logistic(train, &c)?;
        nonzero.push(full.selected.len());
        fits.push(full);
    }
    let top = recalls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pick = (0..grid.len())
        .filter(|&i| recalls[i] >= top - 1e-12 && nonzero[i] > 0)
        .max_by(|&a, &b| grid[a].total_cmp(&grid[b]))
        .or_else(|| (0..grid.len()).max_by_key(|&i| nonzero[i]))
        .expect("grid is non-empty");
    Ok(LambdaSelection {
        grid: grid.to_vec(),
        recalls,
        nonzero,
        best: grid[pick],
        selection: fits.swap_remove(pick),
    })
}
