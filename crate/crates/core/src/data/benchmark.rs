//! Seeded stand-in for a confidential rare-event production dataset.
//!
//! Continuous columns are Gaussian mixtures with one to three modes and
//! column-specific scales, centred on zero. Three continuous columns (or fewer
//! when there are not that many) are standard normal for negatives and shifted
//! by `class_separation` for positives; nothing else carries signal.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use super::schema::{ColumnSchema, FeatureKind};
use crate::error::{bail, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, permutation, rng_from_seed, Rng};

/// Number of planted informative continuous columns.
pub const PLANTED: usize = 3;
/// Levels of each generated categorical column.
pub const CATEGORICAL_LEVELS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub n_rows: usize,
    pub n_positives: usize,
    pub n_continuous: usize,
    pub n_categorical: usize,
    pub n_binary: usize,
    pub class_separation: f64,
    pub seed: u64,
}

impl BenchmarkSpec {
    /// Mill-shaped default: 18,398 rows, 124 breaks, 59 continuous plus one
    /// categorical and one binary predictor.
    pub fn mill_shaped(seed: u64) -> Self {
        Self {
            n_rows: 18_398,
            n_positives: 124,
            n_continuous: 59,
            n_categorical: 1,
            n_binary: 1,
            class_separation: 2.5,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_positives == 0 || self.n_positives >= self.n_rows {
            bail!(
                Config,
                "need 0 < n_positives < n_rows, got {} of {}",
                self.n_positives,
                self.n_rows
            );
        }
        if self.n_continuous + self.n_categorical + self.n_binary == 0 {
            bail!(Config, "benchmark needs at least one feature");
        }
        if !(0.0..=5.0).contains(&self.class_separation) {
            bail!(
                Config,
                "class_separation {} outside [0, 5]",
                self.class_separation
            );
        }
        Ok(())
    }
}

/// A generated dataset together with the names of its planted columns.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub dataset: TabularDataset,
    pub informative: Vec<String>,
}

struct Mixture {
    means: Vec<f64>,
    sds: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
}

impl Mixture {
    fn random(rng: &mut Rng) -> Self {
        let modes = match rng.random_range(0..10) {
            0..=3 => 1,
            4..=7 => 2,
            _ => 3,
        };
        let gap = rng.random_range(2.0..4.0);
        let means: Vec<f64> = match modes {
            1 => vec![0.0],
            2 => vec![-gap, gap],
            _ => vec![-gap, 0.0, gap],
        };
        let sds = (0..modes).map(|_| rng.random_range(0.5..1.2)).collect();
        let raw: Vec<f64> = (0..modes).map(|_| rng.random_range(0.3..1.0)).collect();
        let total: f64 = raw.iter().sum();
        Self {
            means,
            sds,
            weights: raw.iter().map(|w| w / total).collect(),
            scale: rng.random_range(0.5..5.0),
        }
    }

    fn draw(&self, rng: &mut Rng) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        self.scale * (self.means[k] + self.sds[k] * z)
    }
}

pub fn generate(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let n_feat = spec.n_continuous + spec.n_categorical + spec.n_binary;

    let planted: Vec<usize> = {
        let k = PLANTED.min(spec.n_continuous);
        let mut p = sample_indices(&mut rng, spec.n_continuous, k).into_vec();
        p.sort_unstable();
        p
    };
    let mixtures: Vec<Mixture> = (0..spec.n_continuous)
        .map(|_| Mixture::random(&mut rng))
        .collect();
    let level_probs: Vec<Vec<f64>> = (0..spec.n_categorical)
        .map(|_| {
            let raw: Vec<f64> = (0..CATEGORICAL_LEVELS)
                .map(|_| rng.random_range(0.2..1.0))
                .collect();
            let t: f64 = raw.iter().sum();
            raw.iter().map(|w| w / t).collect()
        })
        .collect();
    let binary_p: Vec<f64> = (0..spec.n_binary)
        .map(|_| rng.random_range(0.15..0.5))
        .collect();

    let mut labels = vec![0u8; spec.n_rows];
    {
        let mut lrng = rng_from_seed(derive_seed(spec.seed, 1));
        for &i in permutation(spec.n_rows, &mut lrng)
            .iter()
            .take(spec.n_positives)
        {
            labels[i] = 1;
        }
    }

    let mut data = Matrix::zeros(spec.n_rows, n_feat);
    let mut vrng = rng_from_seed(derive_seed(spec.seed, 2));
    for (i, &label) in labels.iter().enumerate() {
        let row = data.row_mut(i);
        for j in 0..spec.n_continuous {
            row[j] = if planted.binary_search(&j).is_ok() {
                let z: f64 = StandardNormal.sample(&mut vrng);
                z + if label == 1 {
                    spec.class_separation
                } else {
                    0.0
                }
            } else {
                mixtures[j].draw(&mut vrng)
            };
        }
        for (c, probs) in level_probs.iter().enumerate() {
            let u: f64 = vrng.random();
            let mut acc = 0.0;
            let mut code = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    code = k;
                    break;
                }
            }
            row[spec.n_continuous + c] = code as f64;
        }
        for (b, &p) in binary_p.iter().enumerate() {
            let u: f64 = vrng.random();
            row[spec.n_continuous + spec.n_categorical + b] = if u < p { 1.0 } else { 0.0 };
        }
    }
    // centre the non-planted continuous columns
    for j in 0..spec.n_continuous {
        if planted.binary_search(&j).is_ok() {
            continue;
        }
        let m = data.iter_rows().map(|r| r[j]).sum::<f64>() / spec.n_rows as f64;
        for i in 0..spec.n_rows {
            let v = data.get(i, j) - m;
            data.set(i, j, v);
        }
    }

    let mut columns = vec![ColumnSchema::label("y")];
    for j in 0..n_feat {
        let kind = if j < spec.n_continuous {
            FeatureKind::Continuous
        } else if j < spec.n_continuous + spec.n_categorical {
            FeatureKind::Categorical {
                cardinality: CATEGORICAL_LEVELS,
            }
        } else {
            FeatureKind::Binary
        };
        columns.push(ColumnSchema::feature(format!("x{}", j + 1), kind));
    }
    let informative = planted.iter().map(|j| format!("x{}", j + 1)).collect();
    Ok(Benchmark {
        dataset: TabularDataset::new(columns, data, labels)?,
        informative,
    })
}

pub fn make_benchmark(spec: &BenchmarkSpec) -> Result<TabularDataset> {
    generate(spec).map(|b| b.dataset)
}

/// Category frequencies of the toy dataset's categorical column.
pub const TOY_LEVEL_PROBS: [f64; 3] = [0.5, 0.3, 0.2];
/// Mode centres of the toy dataset's continuous column.
pub const TOY_MODES: [f64; 2] = [-5.0, 5.0];

/// Small dataset for generator checks: label `y` (about 5% ones), continuous
/// `a` from an even mix of N(-5, 1) and N(5, 1), and categorical `c` with
/// frequencies [`TOY_LEVEL_PROBS`]. Features are independent of the label.
pub fn make_toy(n_rows: usize, seed: u64) -> Result<TabularDataset> {
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(2 * n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let z: f64 = StandardNormal.sample(&mut rng);
        let centre = TOY_MODES[rng.random_range(0..2)];
        let u: f64 = rng.random();
        let code = if u < TOY_LEVEL_PROBS[0] {
            0.0
        } else if u < TOY_LEVEL_PROBS[0] + TOY_LEVEL_PROBS[1] {
            1.0
        } else {
            2.0
        };
        data.push(centre + z);
        data.push(code);
        labels.push(u8::from(rng.random::<f64>() < 0.05));
    }
    let columns = vec![
        ColumnSchema::label("y"),
        ColumnSchema::feature("a", FeatureKind::Continuous),
        ColumnSchema::feature("c", FeatureKind::Categorical { cardinality: 3 }),
    ];
    TabularDataset::new(columns, Matrix::from_vec(n_rows, 2, data)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn exact_class_counts() {
        let ds = make_benchmark(&BenchmarkSpec::mill_shaped(4)).unwrap();
        assert_eq!(ds.class_counts(), [18_274, 124]);
        assert_eq!(ds.n_features(), 61);
        let cols = ds.feature_schema();
        assert_eq!(
            cols[59].kind,
            FeatureKind::Categorical {
                cardinality: CATEGORICAL_LEVELS
            }
        );
        assert_eq!(cols[60].kind, FeatureKind::Binary);
    }

    #[test]
    fn toy_frequencies() {
        let ds = make_toy(20_000, 3).unwrap();
        let n = ds.row_count() as f64;
        let pos = ds.class_counts()[1] as f64 / n;
        assert!((pos - 0.05).abs() < 0.01, "{pos}");
        for (k, p) in TOY_LEVEL_PROBS.iter().enumerate() {
            let f = ds
                .features()
                .iter_rows()
                .filter(|r| r[1] == k as f64)
                .count() as f64
                / n;
            assert!((f - p).abs() < 0.02, "level {k}: {f}");
        }
        let upper = ds.features().iter_rows().filter(|r| r[0] > 0.0).count() as f64 / n;
        assert!((upper - 0.5).abs() < 0.02);
    }

    #[test]
    fn deterministic() {
        let s = BenchmarkSpec {
            n_rows: 300,
            n_positives: 20,
            ..BenchmarkSpec::mill_shaped(9)
        };
        assert_eq!(make_benchmark(&s).unwrap(), make_benchmark(&s).unwrap());
    }

    #[test]
    fn infeasible_counts() {
        let mut s = BenchmarkSpec::mill_shaped(0);
        s.n_positives = s.n_rows;
        assert!(matches!(make_benchmark(&s), Err(Error::Config(_))));
        let mut s = BenchmarkSpec::mill_shaped(0);
        s.n_continuous = 0;
        s.n_categorical = 0;
        s.n_binary = 0;
        assert!(matches!(make_benchmark(&s), Err(Error::Config(_))));
        let mut s = BenchmarkSpec::mill_shaped(0);
        s.class_separation = 6.0;
        assert!(make_benchmark(&s).is_err());
    }

    #[test]
    fn planted_gap_matches_separation() {
        // sample-mean oracle on the planted columns
        let spec = BenchmarkSpec {
            n_rows: 6_000,
            n_positives: 1_000,
            class_separation: 3.0,
            ..BenchmarkSpec::mill_shaped(21)
        };
        let b = generate(&spec).unwrap();
        let names = b.dataset.feature_names();
        assert_eq!(b.informative.len(), 3);
        for inf in &b.informative {
            let j = names.iter().position(|n| n == inf).unwrap();
            let (mut s0, mut s1) = (0.0, 0.0);
            for (r, &l) in b.dataset.features().iter_rows().zip(b.dataset.labels()) {
                if l == 1 {
                    s1 += r[j]
                } else {
                    s0 += r[j]
                }
            }
            let gap = s1 / 1_000.0 - s0 / 5_000.0;
            assert!((gap - 3.0).abs() <= 0.2, "{inf}: gap {gap}");
        }
    }
}
