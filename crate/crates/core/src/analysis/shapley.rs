//! Permutation-sampling Shapley values with antithetic orderings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{bail, Result};
use crate::math::{round, sqrt};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, permutation, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub instance_index: Option<usize>,
    pub phi: Vec<f64>,
    /// Monte-Carlo standard error of each `phi`, from antithetic pair means.
    pub std_errors: Vec<f64>,
    /// Mean model output over the background rows.
    pub base_value: f64,
    pub model_output: f64,
    pub n_permutations: usize,
}

impl Attribution {
    /// `sum(phi) + base_value - model_output`.
    pub fn local_accuracy_gap(&self) -> f64 {
        self.phi.iter().sum::<f64>() + self.base_value - self.model_output
    }
}

/// Estimates Shapley values of `f` at `instance`. Orderings come in pairs
/// (a random permutation and its reverse) and each pair shares one
/// background row, cycling through the background in order. When the pair
/// count is a multiple of the background size, `sum(phi)` equals
/// `f(instance) - base_value` up to rounding. An odd `n_permutations` is
/// rounded up to the next pair.
pub fn shapley_attribution<F: Fn(&[f64]) -> f64>(
    f: F,
    instance: &[f64],
    background: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    if n_permutations < 2 {
        bail!(Config, "need at least 2 permutations, got {n_permutations}");
    }
    if background.rows() == 0 {
        bail!(Domain, "background sample is empty");
    }
    let p = instance.len();
    if background.cols() != p {
        bail!(
            Shape,
            "instance has {p} features, background {}",
            background.cols()
        );
    }
    let pairs = n_permutations.div_ceil(2);
    let mut rng = rng_from_seed(seed);
    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    let mut pair_phi = vec![0.0; p];
    let mut x = vec![0.0; p];
    for k in 0..pairs {
        let z = background.row(k % background.rows());
        let order = permutation(p, &mut rng);
        pair_phi.iter_mut().for_each(|v| *v = 0.0);
        for reversed in [false, true] {
            x.copy_from_slice(z);
            let mut prev = f(&x);
            for step in 0..p {
                let j = if reversed {
                    order[p - 1 - step]
                } else {
                    order[step]
                };
                x[j] = instance[j];
                let next = f(&x);
                pair_phi[j] += 0.5 * (next - prev);
                prev = next;
            }
        }
        for j in 0..p {
            sum[j] += pair_phi[j];
            sum_sq[j] += pair_phi[j] * pair_phi[j];
        }
    }
    let m = pairs as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_errors = if pairs > 1 {
        (0..p)
            .map(|j| sqrt(((sum_sq[j] - m * phi[j] * phi[j]) / (m - 1.0)).max(0.0) / m))
            .collect()
    } else {
        vec![f64::NAN; p]
    };
    let base_value = background.iter_rows().map(&f).sum::<f64>() / background.rows() as f64;
    Ok(Attribution {
        instance_index: None,
        phi,
        std_errors,
        base_value,
        model_output: f(instance),
        n_permutations: 2 * pairs,
    })
}

/// Up to `size` rows drawn without replacement, split across classes in
/// proportion to their counts (each present class gets at least one row).
pub fn stratified_background(ds: &TabularDataset, size: usize, seed: u64) -> Matrix {
    let n = ds.row_count();
    if size >= n {
        return ds.features().clone();
    }
    let counts = ds.class_counts();
    let mut take = [0usize; 2];
    for c in 0..2 {
        if counts[c] > 0 {
            take[c] =
                (round(size as f64 * counts[c] as f64 / n as f64) as usize).clamp(1, counts[c]);
        }
    }
    while take[0] + take[1] > size {
        let c = if take[0] >= take[1] { 0 } else { 1 };
        take[c] -= 1;
    }
    let mut rows = Vec::new();
    for c in 0..2u8 {
        let (_, idx) = ds.class_rows(c);
        let order = permutation(idx.len(), &mut rng_from_seed(derive_seed(seed, c as u64)));
        rows.extend(order.iter().take(take[c as usize]).map(|&o| idx[o]));
    }
    rows.sort_unstable();
    ds.features().select_rows(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub class: u8,
    pub names: Vec<String>,
    /// Mean `|phi|` over instances of this class.
    pub importance: Vec<f64>,
    pub n_instances: usize,
    /// True when the class had no rows, leaving `importance` all zero.
    pub empty: bool,
}

impl GlobalImportance {
    /// Feature indices, most important first.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.importance.len()).collect();
        idx.sort_by(|&a, &b| {
            self.importance[b]
                .total_cmp(&self.importance[a])
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Mean absolute attribution per feature over up to `max_instances` rows of
/// each true class, returned as `[class 0, class 1]`.
pub fn global_importance<F: Fn(&[f64]) -> f64 + Copy>(
    f: F,
    ds: &TabularDataset,
    background: &Matrix,
    n_permutations: usize,
    max_instances: usize,
    seed: u64,
) -> Result<[GlobalImportance; 2]> {
    let names = ds.feature_names();
    let p = names.len();
    let mut out = Vec::with_capacity(2);
    for class in 0..2u8 {
        let (_, idx) = ds.class_rows(class);
        let order = permutation(
            idx.len(),
            &mut rng_from_seed(derive_seed(seed, 10 + class as u64)),
        );
        let chosen: Vec<usize> = order.iter().take(max_instances).map(|&o| idx[o]).collect();
        let mut importance = vec![0.0; p];
        for (k, &i) in chosen.iter().enumerate() {
            let a = shapley_attribution(
                f,
                ds.row(i),
                background,
                n_permutations,
                derive_seed(seed, 1000 + (class as u64) * 1_000_000 + k as u64),
            )?;
            for (imp, v) in importance.iter_mut().zip(&a.phi) {
                *imp += v.abs();
            }
        }
        if !chosen.is_empty() {
            importance
                .iter_mut()
                .for_each(|v| *v /= chosen.len() as f64);
        }
        out.push(GlobalImportance {
            class,
            names: names.clone(),
            importance,
            n_instances: chosen.len(),
            empty: chosen.is_empty(),
        });
    }
    let second = out.pop().expect("two classes");
    let first = out.pop().expect("two classes");
    Ok([first, second])
}
