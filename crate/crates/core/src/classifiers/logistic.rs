use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::encoding::DesignLayout;
use super::TrainConfig;
use crate::data::TabularDataset;
use crate::error::{bail, Error, Result};
use crate::math::{sigmoid, softplus};
use crate::matrix::Matrix;

/// Logistic regression over the one-hot design of the feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub layout: DesignLayout,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    /// Max-norm of the objective gradient at the returned parameters.
    pub grad_max_norm: f64,
    pub final_loss: f64,
}

impl LogisticModel {
    /// All-zero model; predicts probability 0.5 everywhere.
    pub fn zeroed(layout: DesignLayout) -> Self {
        let w = layout.width();
        Self {
            layout,
            weights: vec![0.0; w],
            bias: 0.0,
            threshold: 0.5,
            grad_max_norm: f64::NAN,
            final_loss: f64::NAN,
        }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.layout.dot(row, &self.weights) + self.bias
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.score(row))
    }

    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>> {
        self.check_width(rows)?;
        Ok(rows.iter_rows().map(|r| self.proba_row(r)).collect())
    }

    /// Label 1 iff probability strictly exceeds the threshold.
    pub fn predict_label(&self, rows: &Matrix) -> Result<Vec<u8>> {
        self.check_width(rows)?;
        Ok(rows
            .iter_rows()
            .map(|r| u8::from(self.proba_row(r) > self.threshold))
            .collect())
    }

    fn check_width(&self, rows: &Matrix) -> Result<()> {
        if rows.cols() != self.layout.n_raw() {
            bail!(
                Shape,
                "model expects {} features, rows have {}",
                self.layout.n_raw(),
                rows.cols()
            );
        }
        Ok(())
    }
}

/// Objective value and gradient of the mean negative log-likelihood plus
/// `l2 / 2 * |w|^2` (bias unpenalised) on an expanded design.
pub fn logistic_objective(
    design: &Matrix,
    y: &[f64],
    w: &[f64],
    b: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = design.rows() as f64;
    let mut grad = vec![0.0; w.len()];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (row, &t) in design.iter_rows().zip(y) {
        let z = crate::math::dot(row, w) + b;
        // -[t ln s(z) + (1-t) ln(1-s(z))] = softplus(z) - t z
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, &x) in grad.iter_mut().zip(row) {
            *g += r * x;
        }
        grad_b += r;
    }
    loss /= n;
    grad.iter_mut()
        .zip(w)
        .for_each(|(g, &wi)| *g = *g / n + l2 * wi);
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    (loss, grad, grad_b / n)
}

/// Expands every row through `layout`.
pub fn design_matrix(layout: &DesignLayout, features: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(features.rows(), layout.width());
    for i in 0..features.rows() {
        layout.expand_into(features.row(i), out.row_mut(i));
    }
    out
}

/// Full-batch gradient descent from zero weights. Returns the model and the
/// objective value recorded before every step and after the last one.
pub fn fit_logistic_traced(
    train: &TabularDataset,
    cfg: &TrainConfig,
) -> Result<(LogisticModel, Vec<f64>)> {
    let [n0, n1] = train.class_counts();
    if n0 == 0 || n1 == 0 {
        bail!(
            Training,
            "logistic regression needs both classes (got {n0} / {n1})"
        );
    }
    let layout = DesignLayout::new(&train.feature_schema());
    let design = design_matrix(&layout, train.features());
    let y: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();

    let mut w = vec![0.0; layout.width()];
    let mut b = 0.0;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    let (mut loss, mut grad, mut grad_b) = logistic_objective(&design, &y, &w, b, cfg.l2);
    for epoch in 0..cfg.epochs {
        if !loss.is_finite() {
            return Err(Error::Numerical(alloc::format!(
                "logistic loss became {loss} at epoch {epoch}; lower the learning rate"
            )));
        }
        trace.push(loss);
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= cfg.learning_rate * g;
        }
        b -= cfg.learning_rate * grad_b;
        (loss, grad, grad_b) = logistic_objective(&design, &y, &w, b, cfg.l2);
    }
    if !loss.is_finite() {
        bail!(
            Numerical,
            "logistic loss became {loss}; lower the learning rate"
        );
    }
    trace.push(loss);
    let grad_max_norm = grad
        .iter()
        .chain(core::iter::once(&grad_b))
        .fold(0.0f64, |m, g| m.max(g.abs()));
    Ok((
        LogisticModel {
            layout,
            weights: w,
            bias: b,
            threshold: cfg.threshold,
            grad_max_norm,
            final_loss: loss,
        },
        trace,
    ))
}

pub fn fit_logistic(train: &TabularDataset, cfg: &TrainConfig) -> Result<LogisticModel> {
    fit_logistic_traced(train, cfg).map(|(m, _)| m)
}
