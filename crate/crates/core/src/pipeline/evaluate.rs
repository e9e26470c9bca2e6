use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::classifiers::{fit_model, Classifier, ModelKind, TrainConfig};
use crate::data::TabularDataset;
use crate::error::{bail, Result};
use crate::math::{quantile_sorted, sort_floats};
use crate::metrics::{evaluate, MetricsSummary};
use crate::rng::derive_seed;

/// Five-number summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values that went into the summary (undefined metrics are skipped).
    pub count: usize,
}

impl Quantiles {
    /// `None` when every value is undefined.
    pub fn of(values: impl Iterator<Item = Option<f64>>) -> Option<Self> {
        let mut v: Vec<f64> = values.flatten().collect();
        if v.is_empty() {
            return None;
        }
        sort_floats(&mut v);
        Some(Self {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
            count: v.len(),
        })
    }
}

/// Per-metric distributions over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDistribution {
    pub recall_class0: Option<Quantiles>,
    pub recall_class1: Option<Quantiles>,
    pub precision_class0: Option<Quantiles>,
    pub precision_class1: Option<Quantiles>,
    pub f1_class1: Option<Quantiles>,
    pub accuracy: Option<Quantiles>,
}

impl MetricDistribution {
    pub fn from_trials(trials: &[MetricsSummary]) -> Self {
        Self {
            recall_class0: Quantiles::of(trials.iter().map(|t| t.class0.recall)),
            recall_class1: Quantiles::of(trials.iter().map(|t| t.class1.recall)),
            precision_class0: Quantiles::of(trials.iter().map(|t| t.class0.precision)),
            precision_class1: Quantiles::of(trials.iter().map(|t| t.class1.precision)),
            f1_class1: Quantiles::of(trials.iter().map(|t| t.class1.f1)),
            accuracy: Quantiles::of(trials.iter().map(|t| Some(t.overall_accuracy))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: ModelKind,
    /// One summary per trial, in trial order.
    pub trials: Vec<MetricsSummary>,
    pub distribution: MetricDistribution,
}

/// Trains every model `n_trials` times on `train` and scores it on `test`.
/// Trial `t` uses seed `derive_seed(seed, t)`. Models whose fit ignores the
/// seed are fitted once and the summary repeated, which gives the same
/// result as refitting.
pub fn evaluate_models(
    train: &TabularDataset,
    test: &TabularDataset,
    models: &[ModelKind],
    cfg: &TrainConfig,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<ModelEvaluation>> {
    if n_trials == 0 {
        bail!(Config, "n_trials must be positive");
    }
    let [n0, n1] = train.class_counts();
    if n0 == 0 || n1 == 0 {
        bail!(Training, "training set lacks a class ({n0} / {n1})");
    }
    let mut out = Vec::with_capacity(models.len());
    for &kind in models {
        let run = |t: usize| -> Result<MetricsSummary> {
            let c = TrainConfig {
                seed: derive_seed(seed, t as u64),
                ..cfg.clone()
            };
            let model = fit_model(kind, train, &c)?;
            evaluate(&model.predict(test.features()), test.labels())
        };
        let trials: Vec<MetricsSummary> = if kind.is_deterministic() {
            let once = run(0)?;
            alloc::vec![once; n_trials]
        } else {
            run_trials(n_trials, cfg.parallel, run)?
        };
        let distribution = MetricDistribution::from_trials(&trials);
        out.push(ModelEvaluation {
            model: kind,
            trials,
            distribution,
        });
    }
    Ok(out)
}

#[cfg(feature = "parallel")]
fn run_trials<F: Fn(usize) -> Result<MetricsSummary> + Sync + Send>(
    n: usize,
    parallel: bool,
    f: F,
) -> Result<Vec<MetricsSummary>> {
    use rayon::prelude::*;
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn run_trials<F: Fn(usize) -> Result<MetricsSummary>>(
    n: usize,
    _parallel: bool,
    f: F,
) -> Result<Vec<MetricsSummary>> {
    (0..n).map(f).collect()
}
