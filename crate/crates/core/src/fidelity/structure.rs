use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::ks::{chi_square_homogeneity, ks_two_sample, KsResult};
use super::pca::{pca_fit, pca_project};
use crate::data::TabularDataset;
use crate::error::{bail, Result};
use crate::math::{quantile_sorted, sort_floats};
use crate::matrix::Matrix;
use crate::synthetic::SyntheticBatch;

/// Limits for the structure gate. Every limit is a pass condition on its
/// own, so raising a maximum, lowering a minimum or lowering
/// `finite_sample_alpha` can only turn failures into passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureThresholds {
    pub max_ks_per_continuous: f64,
    pub max_categorical_l1: f64,
    pub min_pca_overlap: f64,
    /// Family-wise level for the sampling-noise allowance. A column whose
    /// distance exceeds its limit still passes when the two-sample test
    /// (KS or chi-square) cannot reject equality at `alpha / columns`.
    /// `None` disables the allowance.
    pub finite_sample_alpha: Option<f64>,
}

impl Default for StructureThresholds {
    fn default() -> Self {
        Self {
            max_ks_per_continuous: 0.15,
            max_categorical_l1: 0.10,
            min_pca_overlap: 0.5,
            finite_sample_alpha: Some(0.01),
        }
    }
}

impl StructureThresholds {
    pub fn strict() -> Self {
        Self {
            finite_sample_alpha: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.max_ks_per_continuous)
            || !unit(self.max_categorical_l1)
            || !unit(self.min_pca_overlap)
        {
            bail!(Config, "structure thresholds must lie in [0, 1]");
        }
        if let Some(a) = self.finite_sample_alpha {
            if !unit(a) {
                bail!(Config, "finite_sample_alpha must lie in [0, 1], got {a}");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnKs {
    pub column: usize,
    pub name: String,
    pub ks: KsResult,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnL1 {
    pub column: usize,
    pub name: String,
    pub real_frequencies: Vec<f64>,
    pub synthetic_frequencies: Vec<f64>,
    /// Sum of absolute frequency differences.
    pub l1: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub thresholds: StructureThresholds,
    pub continuous: Vec<ColumnKs>,
    /// Categorical and binary columns.
    pub categorical: Vec<ColumnL1>,
    pub real_projection: Matrix,
    pub synthetic_projection: Matrix,
    pub pca_overlap: f64,
    /// Mean KS statistic over continuous columns (0 when there are none).
    pub aggregate_ks: f64,
    pub pass: bool,
}

fn frequencies(values: impl Iterator<Item = f64>, levels: usize) -> (Vec<u64>, Vec<f64>) {
    let mut counts = vec![0u64; levels];
    for v in values {
        counts[v as usize] += 1;
    }
    let total: u64 = counts.iter().sum();
    let freq = counts
        .iter()
        .map(|&c| c as f64 / total.max(1) as f64)
        .collect();
    (counts, freq)
}

/// Compares a synthetic batch to the real minority rows of `real`.
pub fn structure_check(
    real: &TabularDataset,
    synthetic: &SyntheticBatch,
    thresholds: &StructureThresholds,
) -> Result<FidelityReport> {
    thresholds.validate()?;
    let schema = real.feature_schema();
    if synthetic.rows.cols() != schema.len() {
        bail!(
            Schema,
            "synthetic rows have {} columns, schema has {}",
            synthetic.rows.cols(),
            schema.len()
        );
    }
    if synthetic.is_empty() {
        bail!(Domain, "synthetic batch is empty");
    }
    for (j, col) in schema.iter().enumerate() {
        if let Some(bad) = synthetic
            .rows
            .iter_rows()
            .map(|r| r[j])
            .find(|&v| !col.kind.admits(v))
        {
            bail!(
                Schema,
                "synthetic value {bad} not admitted by column {}",
                col.name
            );
        }
    }
    let (minority, _) = real.class_rows(1);
    if minority.rows() < 2 {
        bail!(
            Domain,
            "structure check needs at least 2 real minority rows"
        );
    }
    let n_tests = schema.len().max(1) as f64;
    let allowance = thresholds.finite_sample_alpha.map(|a| a / n_tests);
    let tolerated = |p: f64| allowance.is_some_and(|a| p >= a);

    let mut continuous = Vec::new();
    let mut categorical = Vec::new();
    for (j, col) in schema.iter().enumerate() {
        let real_col = minority.column(j);
        let syn_col = synthetic.rows.column(j);
        match col.kind.levels() {
            None => {
                let ks = ks_two_sample(&real_col, &syn_col)?;
                let p_value = ks.p_value();
                let pass = ks.statistic <= thresholds.max_ks_per_continuous || tolerated(p_value);
                continuous.push(ColumnKs {
                    column: j,
                    name: col.name.clone(),
                    ks,
                    p_value,
                    pass,
                });
            }
            Some(levels) => {
                let (rc, rf) = frequencies(real_col.into_iter(), levels);
                let (sc, sf) = frequencies(syn_col.into_iter(), levels);
                let l1: f64 = rf.iter().zip(&sf).map(|(a, b)| (a - b).abs()).sum();
                let (_, p_value) = chi_square_homogeneity(&rc, &sc);
                let pass = l1 <= thresholds.max_categorical_l1 || tolerated(p_value);
                categorical.push(ColumnL1 {
                    column: j,
                    name: col.name.clone(),
                    real_frequencies: rf,
                    synthetic_frequencies: sf,
                    l1,
                    p_value,
                    pass,
                });
            }
        }
    }

    let pca = pca_fit(&minority, 2)?;
    let real_projection = pca_project(&pca, &minority)?;
    let synthetic_projection = pca_project(&pca, &synthetic.rows)?;
    let pca_overlap = central_box_overlap(&real_projection, &synthetic_projection, 0.99);

    let aggregate_ks = if continuous.is_empty() {
        0.0
    } else {
        continuous.iter().map(|c| c.ks.statistic).sum::<f64>() / continuous.len() as f64
    };
    let pass = continuous.iter().all(|c| c.pass)
        && categorical.iter().all(|c| c.pass)
        && pca_overlap >= thresholds.min_pca_overlap;
    Ok(FidelityReport {
        thresholds: thresholds.clone(),
        continuous,
        categorical,
        real_projection,
        synthetic_projection,
        pca_overlap,
        aggregate_ks,
        pass,
    })
}

/// Fraction of `points` inside the axis-aligned box spanned by the central
/// `coverage` mass of `reference` on every axis.
pub fn central_box_overlap(reference: &Matrix, points: &Matrix, coverage: f64) -> f64 {
    if points.rows() == 0 {
        return 0.0;
    }
    let tail = (1.0 - coverage) / 2.0;
    let bounds: Vec<(f64, f64)> = (0..reference.cols())
        .map(|c| {
            let mut v = reference.column(c);
            sort_floats(&mut v);
            (quantile_sorted(&v, tail), quantile_sorted(&v, 1.0 - tail))
        })
        .collect();
    let inside = points
        .iter_rows()
        .filter(|r| {
            r.iter()
                .zip(&bounds)
                .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
        })
        .count();
    inside as f64 / points.rows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSchema, FeatureKind};
    use crate::rng::rng_from_seed;
    use crate::synthetic::{Provenance, Technique};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn toy(n: usize, seed: u64) -> TabularDataset {
        let mut rng = rng_from_seed(seed);
        let cols = vec![
            ColumnSchema::label("y"),
            ColumnSchema::feature("a", FeatureKind::Continuous),
            ColumnSchema::feature("b", FeatureKind::Continuous),
            ColumnSchema::feature("c", FeatureKind::Categorical { cardinality: 3 }),
        ];
        let mut rows = Vec::new();
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            rows.push([a, 0.5 * a + b, rng.random_range(0..3) as f64]);
        }
        TabularDataset::new(cols, Matrix::from_rows(&rows).unwrap(), vec![1; n]).unwrap()
    }

    fn bootstrap(real: &TabularDataset, m: usize, seed: u64) -> SyntheticBatch {
        let mut rng = rng_from_seed(seed);
        let mut batch = SyntheticBatch::empty(real.n_features());
        for _ in 0..m {
            let i = rng.random_range(0..real.row_count());
            batch.rows.push_row(real.row(i)).unwrap();
            batch.labels.push(1);
            batch.provenance.push(Provenance {
                technique: Technique::Smote,
                base_index: Some(i),
                neighbor_index: None,
                lambda: None,
                seed,
            });
        }
        batch
    }

    #[test]
    fn bootstrap_resample_passes() {
        let real = toy(800, 1);
        let batch = bootstrap(&real, 800, 2);
        let rep = structure_check(&real, &batch, &StructureThresholds::strict()).unwrap();
        assert!(rep.pass);
        assert!(
            rep.continuous.iter().all(|c| c.ks.statistic <= 0.05),
            "{:?}",
            rep.continuous
        );
    }

    #[test]
    fn shifted_column_fails() {
        let real = toy(600, 3);
        let mut batch = bootstrap(&real, 600, 4);
        for i in 0..batch.len() {
            let v = batch.rows.get(i, 1) + 10.0 * 1.118;
            batch.rows.set(i, 1, v);
        }
        let rep = structure_check(&real, &batch, &StructureThresholds::default()).unwrap();
        assert!(!rep.pass);
        assert!(rep.continuous[1].ks.statistic > 0.99);
        assert!(rep.continuous[0].pass);
    }

    #[test]
    fn width_mismatch_is_schema_error() {
        let real = toy(50, 5);
        let batch = SyntheticBatch::empty(2);
        assert!(matches!(
            structure_check(&real, &batch, &StructureThresholds::default()),
            Err(crate::Error::Schema(_))
        ));
    }

    #[test]
    fn loosening_never_breaks_a_pass() {
        let real = toy(120, 6);
        let mut batch = bootstrap(&real, 300, 7);
        for i in 0..batch.len() {
            let v = batch.rows.get(i, 0) * 1.3 + 0.2;
            batch.rows.set(i, 0, v);
        }
        let grid = [0.0, 0.05, 0.1, 0.2, 0.5, 1.0];
        for &ks in &grid {
            for &l1 in &grid {
                for &ov in &grid {
                    let t = StructureThresholds {
                        max_ks_per_continuous: ks,
                        max_categorical_l1: l1,
                        min_pca_overlap: ov,
                        finite_sample_alpha: None,
                    };
                    if !structure_check(&real, &batch, &t).unwrap().pass {
                        continue;
                    }
                    for (dk, dl, dov) in [(0.1, 0.0, 0.0), (0.0, 0.1, 0.0), (0.0, 0.0, -0.1)] {
                        let looser = StructureThresholds {
                            max_ks_per_continuous: (ks + dk).min(1.0),
                            max_categorical_l1: (l1 + dl).min(1.0),
                            min_pca_overlap: (ov + dov).max(0.0),
                            finite_sample_alpha: Some(0.05),
                        };
                        assert!(structure_check(&real, &batch, &looser).unwrap().pass);
                    }
                }
            }
        }
    }

    #[test]
    fn overlap_box_counts_inside_points() {
        let reference = Matrix::from_rows(
            &(0..=200)
                .map(|i| [i as f64, -(i as f64)])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let points = Matrix::from_rows(&[[100.0, -100.0], [500.0, -100.0], [0.0, 0.0]]).unwrap();
        let f = central_box_overlap(&reference, &points, 0.99);
        assert!((f - 1.0 / 3.0).abs() < 1e-12);
    }
}
