use alloc::vec::Vec;

use super::dataset::TabularDataset;
use crate::error::{bail, Result};
use crate::math::{floor, round};
use crate::rng::{derive_seed, permutation, rng_from_seed};

/// Disjoint train/test partition of one dataset, with the source row indices
/// kept for leakage audits.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: TabularDataset,
    pub test: TabularDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

/// Seeded hold-out split.
///
/// The test set gets `round(test_fraction * n)` rows. When stratified, that
/// total is apportioned across classes by largest remainder, so each class
/// contributes `floor` or `ceil` of `test_fraction * class_count`.
pub fn split(
    ds: &TabularDataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        bail!(
            Config,
            "test_fraction must lie in (0, 1), got {test_fraction}"
        );
    }
    let n = ds.row_count();
    if n < 2 {
        bail!(Config, "cannot split {n} rows");
    }
    let total_test = round(test_fraction * n as f64) as usize;

    let mut test_indices = Vec::with_capacity(total_test);
    let mut train_indices = Vec::with_capacity(n - total_test);
    if stratified {
        let by_class: [Vec<usize>; 2] = [
            (0..n).filter(|&i| ds.labels()[i] == 0).collect(),
            (0..n).filter(|&i| ds.labels()[i] == 1).collect(),
        ];
        let exact: [f64; 2] = [
            test_fraction * by_class[0].len() as f64,
            test_fraction * by_class[1].len() as f64,
        ];
        let mut take = [floor(exact[0]) as usize, floor(exact[1]) as usize];
        let mut missing = total_test.saturating_sub(take[0] + take[1]);
        // Largest fractional part first; class 0 wins exact ties.
        let mut order = [0usize, 1];
        order.sort_by(|&a, &b| {
            let fa = exact[a] - floor(exact[a]);
            let fb = exact[b] - floor(exact[b]);
            fb.partial_cmp(&fa)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &c in order.iter().cycle().take(4) {
            if missing == 0 {
                break;
            }
            if take[c] < by_class[c].len() {
                take[c] += 1;
                missing -= 1;
            }
        }
        for (c, members) in by_class.iter().enumerate() {
            let mut rng = rng_from_seed(derive_seed(seed, c as u64));
            let perm = permutation(members.len(), &mut rng);
            for (pos, &p) in perm.iter().enumerate() {
                if pos < take[c] {
                    test_indices.push(members[p]);
                } else {
                    train_indices.push(members[p]);
                }
            }
        }
    } else {
        let mut rng = rng_from_seed(seed);
        let perm = permutation(n, &mut rng);
        test_indices.extend_from_slice(&perm[..total_test]);
        train_indices.extend_from_slice(&perm[total_test..]);
    }
    test_indices.sort_unstable();
    train_indices.sort_unstable();

    Ok(SplitPair {
        train: ds.subset(&train_indices),
        test: ds.subset(&test_indices),
        train_indices,
        test_indices,
        seed,
        stratified,
    })
}
