//! Decision tree, random forest and logistic regression behind one
//! [`Classifier`] interface.

mod encoding;
mod forest;
mod logistic;
mod tree;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use encoding::DesignLayout;
pub use forest::{default_features_per_split, fit_forest, ForestModel, BOOTSTRAP_FRACTION};
pub use logistic::{
    design_matrix, fit_logistic, fit_logistic_traced, logistic_objective, LogisticModel,
};
pub use tree::{best_split, fit_tree, gini, SplitCandidate, SplitRule, TreeNode};

use crate::data::TabularDataset;
use crate::error::{bail, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub min_leaf_size: usize,
    pub n_trees: usize,
    /// Candidate features per forest node; `None` means `floor(sqrt(p))`.
    pub features_per_split: Option<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Fit forest trees on the rayon pool (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf_size: 5,
            n_trees: 100,
            features_per_split: None,
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
            threshold: 0.5,
            seed: 0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_leaf_size == 0 || self.n_trees == 0 || self.epochs == 0 {
            bail!(
                Config,
                "max_depth, min_leaf_size, n_trees and epochs must be positive"
            );
        }
        if self.features_per_split == Some(0) {
            bail!(Config, "features_per_split must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0)
            || !(self.l2.is_finite() && self.l2 >= 0.0)
        {
            bail!(
                Config,
                "learning_rate must be positive and l2 non-negative, both finite"
            );
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            bail!(Config, "threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

/// The model families compared by the pipeline. The declaration order
/// (forest, tree, logistic) is the final tie-break when selecting a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Dt,
    Lr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rf, ModelKind::Dt, ModelKind::Lr];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Dt => "dt",
            ModelKind::Lr => "lr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "forest" | "random_forest" => Some(ModelKind::Rf),
            "dt" | "tree" | "decision_tree" => Some(ModelKind::Dt),
            "lr" | "logistic" | "logistic_regression" => Some(ModelKind::Lr),
            _ => None,
        }
    }

    /// True when repeated fits with different seeds give the same model.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, ModelKind::Rf)
    }
}

/// Anything that scores a raw feature row with a class-1 probability.
pub trait Classifier {
    fn n_features(&self) -> usize;
    fn proba_row(&self, row: &[f64]) -> f64;
    fn predict_row(&self, row: &[f64]) -> u8;

    fn predict(&self, rows: &Matrix) -> Vec<u8> {
        rows.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

/// A decision tree together with its input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
    pub n_features: usize,
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn proba_row(&self, row: &[f64]) -> f64 {
        self.root.proba_row(row)
    }
    fn predict_row(&self, row: &[f64]) -> u8 {
        self.root.predict_row(row)
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        usize::MAX
    }
    fn proba_row(&self, row: &[f64]) -> f64 {
        ForestModel::proba_row(self, row)
    }
    fn predict_row(&self, row: &[f64]) -> u8 {
        ForestModel::predict_row(self, row)
    }
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.layout.n_raw()
    }
    fn proba_row(&self, row: &[f64]) -> f64 {
        LogisticModel::proba_row(self, row)
    }
    fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(LogisticModel::proba_row(self, row) > self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Dt(TreeModel),
    Rf(ForestModel),
    Lr(LogisticModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Dt(_) => ModelKind::Dt,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Lr(_) => ModelKind::Lr,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            TrainedModel::Dt(m) => m,
            TrainedModel::Rf(m) => m,
            TrainedModel::Lr(m) => m,
        }
    }
}

impl Classifier for TrainedModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }
    fn proba_row(&self, row: &[f64]) -> f64 {
        self.inner().proba_row(row)
    }
    fn predict_row(&self, row: &[f64]) -> u8 {
        self.inner().predict_row(row)
    }
}

pub fn fit_model(
    kind: ModelKind,
    train: &TabularDataset,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    Ok(match kind {
        ModelKind::Dt => TrainedModel::Dt(TreeModel {
            root: fit_tree(train, cfg, None)?,
            n_features: train.n_features(),
        }),
        ModelKind::Rf => TrainedModel::Rf(fit_forest(train, cfg)?),
        ModelKind::Lr => TrainedModel::Lr(fit_logistic(train, cfg)?),
    })
}
