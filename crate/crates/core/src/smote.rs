//! Synthetic minority over-sampling by interpolating towards k-nearest
//! minority neighbours.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnSchema, FeatureKind};
use crate::error::{bail, Error, Result};
use crate::math::{round, sqrt};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, permutation, rng_from_seed};
use crate::synthetic::{Provenance, SyntheticBatch, Technique};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalPolicy {
    CopyFromBase,
    NeighborMajorityVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub k: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub categorical_policy: CategoricalPolicy,
    /// Standardise continuous columns (by minority std) before measuring distance.
    pub scale_distances: bool,
    /// Label written on every synthetic row.
    pub minority_label: u8,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k: 5,
            n_samples: 1,
            seed: 0,
            categorical_policy: CategoricalPolicy::CopyFromBase,
            scale_distances: true,
            minority_label: 1,
        }
    }
}

/// Result of [`generate_smote`], with the neighbour count actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub batch: SyntheticBatch,
    pub effective_k: usize,
    pub k_clamped: bool,
}

/// Per-column weights for the distance metric: 0 for categorical columns,
/// `1 / std` for continuous ones (when scaling), 1 for binary ones.
pub fn distance_weights(minority: &Matrix, schema: &[ColumnSchema], scale: bool) -> Vec<f64> {
    schema
        .iter()
        .enumerate()
        .map(|(j, c)| match c.kind {
            FeatureKind::Categorical { .. } => 0.0,
            FeatureKind::Binary => 1.0,
            FeatureKind::Continuous if scale => {
                let sd = sqrt(crate::math::variance(&minority.column(j)));
                if sd < crate::data::STD_FLOOR {
                    1.0
                } else {
                    1.0 / sd
                }
            }
            FeatureKind::Continuous => 1.0,
        })
        .collect()
}

/// Indices of the `k` nearest other rows to `i`, nearest first (ties by index).
pub fn nearest_neighbors(rows: &Matrix, weights: &[f64], i: usize, k: usize) -> Vec<usize> {
    let base = rows.row(i);
    let mut d: Vec<(f64, usize)> = (0..rows.rows())
        .filter(|&j| j != i)
        .map(|j| {
            let dist = rows
                .row(j)
                .iter()
                .zip(base)
                .zip(weights)
                .map(|((a, b), w)| {
                    let t = (a - b) * w;
                    t * t
                })
                .sum::<f64>();
            (dist, j)
        })
        .collect();
    d.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

pub fn generate_smote(
    minority: &Matrix,
    schema: &[ColumnSchema],
    cfg: &SmoteConfig,
) -> Result<SmoteOutput> {
    let n = minority.rows();
    if n < 2 {
        return Err(Error::InsufficientMinority(n));
    }
    if cfg.n_samples == 0 {
        bail!(Config, "n_samples must be positive");
    }
    if cfg.k == 0 {
        bail!(Config, "k must be at least 1");
    }
    if schema.len() != minority.cols() {
        bail!(
            Shape,
            "schema has {} features, rows have {}",
            schema.len(),
            minority.cols()
        );
    }
    let effective_k = cfg.k.min(n - 1);
    let weights = distance_weights(minority, schema, cfg.scale_distances);

    // Round-robin over a seeded base order: every base gets floor(N/n) rows,
    // the first N mod n bases of the order get one more.
    let order = permutation(n, &mut rng_from_seed(derive_seed(cfg.seed, u64::MAX)));
    let mut per_base = vec![cfg.n_samples / n; n];
    for &b in order.iter().take(cfg.n_samples % n) {
        per_base[b] += 1;
    }

    let width = minority.cols();
    let mut rows = Matrix::zeros(cfg.n_samples, width);
    let mut provenance = Vec::with_capacity(cfg.n_samples);
    let mut out = 0;
    for (b, &count) in per_base.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let neighbors = nearest_neighbors(minority, &weights, b, effective_k);
        let seed = derive_seed(cfg.seed, b as u64);
        let mut rng = rng_from_seed(seed);
        let base = minority.row(b);
        for _ in 0..count {
            let nb = neighbors[rng.random_range(0..neighbors.len())];
            let lambda: f64 = rng.random();
            let nbr = minority.row(nb);
            let row = rows.row_mut(out);
            for (j, col) in schema.iter().enumerate() {
                row[j] = match col.kind {
                    FeatureKind::Continuous => base[j] + lambda * (nbr[j] - base[j]),
                    FeatureKind::Binary => round(base[j] + lambda * (nbr[j] - base[j])),
                    FeatureKind::Categorical { cardinality } => match cfg.categorical_policy {
                        CategoricalPolicy::CopyFromBase => base[j],
                        CategoricalPolicy::NeighborMajorityVote => {
                            let mut votes = vec![0usize; cardinality as usize];
                            for &m in &neighbors {
                                votes[minority.get(m, j) as usize] += 1;
                            }
                            let mut best = 0;
                            for (c, &v) in votes.iter().enumerate() {
                                if v > votes[best] {
                                    best = c;
                                }
                            }
                            best as f64
                        }
                    },
                };
            }
            provenance.push(Provenance {
                technique: Technique::Smote,
                base_index: Some(b),
                neighbor_index: Some(nb),
                lambda: Some(lambda),
                seed,
            });
            out += 1;
        }
    }

    Ok(SmoteOutput {
        batch: SyntheticBatch {
            rows,
            labels: vec![cfg.minority_label; cfg.n_samples],
            provenance,
        },
        effective_k,
        k_clamped: effective_k < cfg.k,
    })
}
