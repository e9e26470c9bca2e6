//! CART decision tree with Gini impurity.
//!
//! Continuous and binary features split on midpoints between consecutive
//! distinct values (`x <= t` goes left); categorical features split one
//! category against the rest (`x == c` goes left). Equal-quality candidates
//! resolve to the lowest feature index, then the lowest threshold, which makes
//! the fitted tree independent of training row order.

use alloc::boxed::Box;
use alloc::vec::Vec;
use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::data::{FeatureKind, TabularDataset};
use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// `1 - sum(p_i^2)` over the two class counts.
pub fn gini(counts: [u64; 2]) -> Result<f64> {
    let total = counts[0] + counts[1];
    if total == 0 {
        bail!(Domain, "gini of an empty node");
    }
    Ok(gini_unchecked(counts))
}

#[inline]
fn gini_unchecked(counts: [u64; 2]) -> f64 {
    let t = (counts[0] + counts[1]) as f64;
    let p0 = counts[0] as f64 / t;
    let p1 = counts[1] as f64 / t;
    1.0 - (p0 * p0 + p1 * p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// `x <= threshold` goes left.
    Threshold(f64),
    /// `x == category` goes left.
    Category(u32),
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, v: f64) -> bool {
        match *self {
            SplitRule::Threshold(t) => v <= t,
            SplitRule::Category(c) => v == c as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        rule: SplitRule,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: [u64; 2],
    },
}

impl TreeNode {
    pub fn leaf_for(&self, row: &[f64]) -> [u64; 2] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Internal {
                    feature,
                    rule,
                    left,
                    right,
                } => {
                    node = if rule.goes_left(row[*feature]) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Fraction of class 1 in the reached leaf.
    pub fn proba_row(&self, row: &[f64]) -> f64 {
        let c = self.leaf_for(row);
        c[1] as f64 / (c[0] + c[1]) as f64
    }

    /// Majority class of the reached leaf; ties go to class 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let c = self.leaf_for(row);
        u8::from(c[1] > c[0])
    }

    pub fn predict(&self, rows: &Matrix) -> Vec<u8> {
        rows.iter_rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<[u64; 2]> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(n) = stack.pop() {
            match n {
                TreeNode::Leaf { counts } => out.push(*counts),
                TreeNode::Internal { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// Features used by any split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![self];
        while let Some(n) = stack.pop() {
            if let TreeNode::Internal {
                feature,
                left,
                right,
                ..
            } = n
            {
                out.push(*feature);
                stack.push(left);
                stack.push(right);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub rule: SplitRule,
    /// Parent impurity minus the size-weighted child impurities.
    pub decrease: f64,
}

/// Exhaustive best split over `features` for the rows in `idx`.
///
/// Both children must keep at least `min_leaf` rows. Returns `None` when no
/// admissible split improves impurity.
pub fn best_split(
    data: &Matrix,
    labels: &[u8],
    kinds: &[FeatureKind],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = idx.len();
    let mut total = [0u64; 2];
    for &i in idx {
        total[labels[i] as usize] += 1;
    }
    let parent = gini_unchecked(total);
    let nf = n as f64;
    let min_leaf = min_leaf.max(1);
    let mut best: Option<SplitCandidate> = None;
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);

    let consider = |cand: SplitCandidate, best: &mut Option<SplitCandidate>| {
        if cand.decrease <= 1e-15 {
            return;
        }
        let better = match best {
            None => true,
            Some(b) => {
                cand.decrease > b.decrease
                    || (cand.decrease == b.decrease
                        && (cand.feature < b.feature
                            || (cand.feature == b.feature
                                && rule_key(&cand.rule) < rule_key(&b.rule))))
            }
        };
        if better {
            *best = Some(cand);
        }
    };

    for &f in features {
        match kinds[f] {
            FeatureKind::Categorical { cardinality } => {
                let card = cardinality as usize;
                let mut per = alloc::vec![[0u64; 2]; card];
                for &i in idx {
                    per[data.get(i, f) as usize][labels[i] as usize] += 1;
                }
                for (c, left) in per.iter().enumerate() {
                    let nl = left[0] + left[1];
                    let nr = n as u64 - nl;
                    if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                        continue;
                    }
                    let right = [total[0] - left[0], total[1] - left[1]];
                    let child = (nl as f64 * gini_unchecked(*left)
                        + nr as f64 * gini_unchecked(right))
                        / nf;
                    consider(
                        SplitCandidate {
                            feature: f,
                            rule: SplitRule::Category(c as u32),
                            decrease: parent - child,
                        },
                        &mut best,
                    );
                }
            }
            _ => {
                pairs.clear();
                pairs.extend(idx.iter().map(|&i| (data.get(i, f), labels[i])));
                pairs.sort_unstable_by(|a, b| {
                    a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal)
                });
                let mut left = [0u64; 2];
                for k in 0..n - 1 {
                    left[pairs[k].1 as usize] += 1;
                    let (v, next) = (pairs[k].0, pairs[k + 1].0);
                    if v == next {
                        continue;
                    }
                    let nl = k + 1;
                    let nr = n - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let right = [total[0] - left[0], total[1] - left[1]];
                    let child =
                        (nl as f64 * gini_unchecked(left) + nr as f64 * gini_unchecked(right)) / nf;
                    consider(
                        SplitCandidate {
                            feature: f,
                            rule: SplitRule::Threshold(v + (next - v) / 2.0),
                            decrease: parent - child,
                        },
                        &mut best,
                    );
                }
            }
        }
    }
    best
}

fn rule_key(rule: &SplitRule) -> f64 {
    match *rule {
        SplitRule::Threshold(t) => t,
        SplitRule::Category(c) => c as f64,
    }
}

pub(crate) struct TreeBuilder<'a> {
    pub data: &'a Matrix,
    pub labels: &'a [u8],
    pub kinds: Vec<FeatureKind>,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fixed candidate features; ignored when `per_node` is set.
    pub candidates: Vec<usize>,
    /// Draw this many candidate features afresh at every node.
    pub per_node: Option<usize>,
}

impl TreeBuilder<'_> {
    pub fn build(&self, idx: &mut [usize], depth: usize, rng: &mut Rng) -> TreeNode {
        let mut counts = [0u64; 2];
        for &i in idx.iter() {
            counts[self.labels[i] as usize] += 1;
        }
        let stop = depth >= self.max_depth
            || idx.len() < 2 * self.min_leaf.max(1)
            || counts[0] == 0
            || counts[1] == 0;
        if stop {
            return TreeNode::Leaf { counts };
        }
        let drawn;
        let features: &[usize] = match self.per_node {
            Some(k) => {
                let p = self.kinds.len();
                let mut v = sample_indices(rng, p, k.min(p)).into_vec();
                v.sort_unstable();
                drawn = v;
                &drawn
            }
            None => &self.candidates,
        };
        let Some(split) = best_split(
            self.data,
            self.labels,
            &self.kinds,
            idx,
            features,
            self.min_leaf,
        ) else {
            return TreeNode::Leaf { counts };
        };
        // stable partition keeps row order inside each child
        let (mut l, mut r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| split.rule.goes_left(self.data.get(i, split.feature)));
        let left = self.build(&mut l, depth + 1, rng);
        let right = self.build(&mut r, depth + 1, rng);
        TreeNode::Internal {
            feature: split.feature,
            rule: split.rule,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Fits one tree on all rows of `train`, considering `feature_subset`
/// (default: every feature) at each node.
pub fn fit_tree(
    train: &TabularDataset,
    cfg: &TrainConfig,
    feature_subset: Option<&[usize]>,
) -> Result<TreeNode> {
    if train.row_count() == 0 {
        bail!(Training, "cannot fit a tree on zero rows");
    }
    let kinds: Vec<FeatureKind> = train.feature_columns().map(|c| c.kind).collect();
    let candidates = match feature_subset {
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&f| f >= kinds.len()) {
                bail!(Config, "feature index {bad} out of range");
            }
            let mut v = s.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => (0..kinds.len()).collect(),
    };
    let builder = TreeBuilder {
        data: train.features(),
        labels: train.labels(),
        kinds,
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf_size,
        candidates,
        per_node: None,
    };
    let mut idx: Vec<usize> = (0..train.row_count()).collect();
    let mut rng = crate::rng::rng_from_seed(cfg.seed);
    Ok(builder.build(&mut idx, 0, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSchema;
    use alloc::vec;

    #[test]
    fn gini_values() {
        assert_eq!(gini([5, 5]).unwrap(), 0.5);
        assert_eq!(gini([10, 0]).unwrap(), 0.0);
        assert!((gini([3, 1]).unwrap() - 0.375).abs() < 1e-15);
        assert!(gini([0, 0]).is_err());
    }

    fn one_d(values: &[f64], labels: &[u8]) -> TabularDataset {
        let mut m = Matrix::with_width(1);
        for &v in values {
            m.push_row(&[v]).unwrap();
        }
        TabularDataset::new(
            vec![
                ColumnSchema::label("y"),
                ColumnSchema::feature("x", FeatureKind::Continuous),
            ],
            m,
            labels.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn pure_input_is_single_leaf() {
        let ds = one_d(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 1, 1]);
        let t = fit_tree(&ds, &TrainConfig::default(), None).unwrap();
        assert_eq!(t, TreeNode::Leaf { counts: [0, 4] });
    }

    #[test]
    fn splits_at_the_gap() {
        let xs = [
            -3.0, -2.0, -1.5, -0.5, 0.25, 1.0, 2.0, 2.5, 3.0, 4.0, -2.5, 5.0,
        ];
        let ys: Vec<u8> = xs.iter().map(|&x| u8::from(x > 0.0)).collect();
        let ds = one_d(&xs, &ys);
        let cfg = TrainConfig {
            min_leaf_size: 1,
            ..TrainConfig::default()
        };
        match fit_tree(&ds, &cfg, None).unwrap() {
            TreeNode::Internal {
                feature,
                rule: SplitRule::Threshold(t),
                left,
                right,
            } => {
                assert_eq!(feature, 0);
                assert!(t > -0.5 && t < 0.25);
                assert!(matches!(*left, TreeNode::Leaf { counts: [5, 0] }));
                assert!(matches!(*right, TreeNode::Leaf { counts: [0, 7] }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn categorical_one_vs_rest() {
        let rows: Vec<[f64; 1]> = (0..30).map(|i| [(i % 3) as f64]).collect();
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 2)).collect();
        let ds = TabularDataset::new(
            vec![
                ColumnSchema::label("y"),
                ColumnSchema::feature("c", FeatureKind::Categorical { cardinality: 3 }),
            ],
            Matrix::from_rows(&rows).unwrap(),
            labels,
        )
        .unwrap();
        let t = fit_tree(&ds, &TrainConfig::default(), None).unwrap();
        match t {
            TreeNode::Internal { rule, .. } => assert_eq!(rule, SplitRule::Category(2)),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(t.predict(ds.features()), ds.labels());
    }

    #[test]
    fn respects_depth_and_leaf_size() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let ys: Vec<u8> = (0..200).map(|i| u8::from((i * 53) % 7 < 3)).collect();
        let ds = one_d(&xs, &ys);
        let cfg = TrainConfig {
            max_depth: 4,
            min_leaf_size: 7,
            ..TrainConfig::default()
        };
        let t = fit_tree(&ds, &cfg, None).unwrap();
        assert!(t.depth() <= 4);
        assert!(t.leaves().iter().all(|c| c[0] + c[1] >= 7));
    }

    #[test]
    fn empty_train_rejected() {
        let ds = one_d(&[], &[]);
        assert!(fit_tree(&ds, &TrainConfig::default(), None).is_err());
    }
}
