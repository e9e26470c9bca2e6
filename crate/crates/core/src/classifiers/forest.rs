use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{TreeBuilder, TreeNode};
use super::TrainConfig;
use crate::data::{FeatureKind, TabularDataset};
use crate::error::{bail, Result};
use crate::math::{floor, round, sqrt};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

/// Share of the training rows drawn (with replacement) for each tree.
pub const BOOTSTRAP_FRACTION: f64 = 2.0 / 3.0;

/// Bagged CART ensemble with per-node feature sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub features_per_split: usize,
    pub bootstrap_fraction: f64,
    pub tree_seeds: Vec<u64>,
}

impl ForestModel {
    pub fn votes(&self, row: &[f64]) -> [usize; 2] {
        let ones = self
            .trees
            .iter()
            .filter(|t| t.predict_row(row) == 1)
            .count();
        [self.trees.len() - ones, ones]
    }

    /// Majority vote; a tie goes to class 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let [zero, one] = self.votes(row);
        u8::from(one > zero)
    }

    /// Share of trees voting class 1.
    pub fn proba_row(&self, row: &[f64]) -> f64 {
        self.votes(row)[1] as f64 / self.trees.len() as f64
    }

    pub fn predict(&self, rows: &Matrix) -> Vec<u8> {
        rows.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

pub fn default_features_per_split(p: usize) -> usize {
    (floor(sqrt(p as f64)) as usize).max(1)
}

fn fit_one(
    train: &TabularDataset,
    kinds: &[FeatureKind],
    cfg: &TrainConfig,
    mtry: usize,
    seed: u64,
) -> TreeNode {
    let n = train.row_count();
    let m = (round(BOOTSTRAP_FRACTION * n as f64) as usize).max(1);
    let mut rng = rng_from_seed(seed);
    let mut idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
    let builder = TreeBuilder {
        data: train.features(),
        labels: train.labels(),
        kinds: kinds.to_vec(),
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf_size,
        candidates: Vec::new(),
        per_node: Some(mtry),
    };
    builder.build(&mut idx, 0, &mut rng)
}

/// Tree `i` is seeded with `derive_seed(cfg.seed, i)`, so serial and
/// parallel fitting produce the same forest.
pub fn fit_forest(train: &TabularDataset, cfg: &TrainConfig) -> Result<ForestModel> {
    if train.row_count() == 0 {
        bail!(Training, "cannot fit a forest on zero rows");
    }
    if cfg.n_trees == 0 {
        bail!(Config, "n_trees must be positive");
    }
    let kinds: Vec<FeatureKind> = train.feature_columns().map(|c| c.kind).collect();
    let mtry = cfg
        .features_per_split
        .unwrap_or_else(|| default_features_per_split(kinds.len()))
        .clamp(1, kinds.len().max(1));
    let tree_seeds: Vec<u64> = (0..cfg.n_trees)
        .map(|i| derive_seed(cfg.seed, i as u64))
        .collect();

    #[cfg(feature = "parallel")]
    let trees: Vec<TreeNode> = if cfg.parallel {
        use rayon::prelude::*;
        tree_seeds
            .par_iter()
            .map(|&s| fit_one(train, &kinds, cfg, mtry, s))
            .collect()
    } else {
        tree_seeds
            .iter()
            .map(|&s| fit_one(train, &kinds, cfg, mtry, s))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees: Vec<TreeNode> = tree_seeds
        .iter()
        .map(|&s| fit_one(train, &kinds, cfg, mtry, s))
        .collect();

    Ok(ForestModel {
        trees,
        features_per_split: mtry,
        bootstrap_fraction: BOOTSTRAP_FRACTION,
        tree_seeds,
    })
}
