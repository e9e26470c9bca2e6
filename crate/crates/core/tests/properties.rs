//! Property tests for the invariants each module promises.

use proptest::prelude::*;
use rarebreak_core::classifiers::{fit_logistic_traced, fit_tree, TrainConfig};
use rarebreak_core::data::{
    apply_scaler, fit_scaler, split, ColumnSchema, FeatureKind, TabularDataset,
};
use rarebreak_core::fidelity::{ks_two_sample, pca_fit, pca_project};
use rarebreak_core::metrics::{confusion, evaluate};
use rarebreak_core::smote::{generate_smote, SmoteConfig};
use rarebreak_core::Matrix;

fn dataset(rows: &[Vec<f64>], labels: &[u8]) -> TabularDataset {
    let p = rows[0].len();
    let mut cols: Vec<_> = (0..p)
        .map(|j| ColumnSchema::feature(format!("f{j}"), FeatureKind::Continuous))
        .collect();
    cols.push(ColumnSchema::label("y"));
    TabularDataset::new(cols, Matrix::from_rows(rows).unwrap(), labels.to_vec()).unwrap()
}

/// Rows of width `p` with labels holding at least two of each class.
fn labelled_rows(p: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (8usize..60).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-10.0f64..10.0, p), n),
            prop::collection::vec(0u8..2, n - 4),
        )
            .prop_map(|(rows, mut labels)| {
                labels.extend([0, 0, 1, 1]);
                (rows, labels)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_partition_and_stratifies((rows, labels) in labelled_rows(2), frac in 0.1f64..0.9, seed in 0u64..1000) {
        let ds = dataset(&rows, &labels);
        let s = split(&ds, frac, seed, true).unwrap();
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.row_count()).collect::<Vec<_>>());
        let counts = ds.class_counts();
        let test = s.test.class_counts();
        for c in 0..2 {
            prop_assert!((test[c] as f64 - frac * counts[c] as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn scaler_is_affine_per_column((rows, labels) in labelled_rows(3)) {
        let ds = dataset(&rows, &labels);
        let params = fit_scaler(&ds);
        let scaled = apply_scaler(&ds, &params).unwrap();
        for i in 0..ds.row_count() {
            for j in 0..3 {
                let want = (ds.row(i)[j] - params.means[j]) / params.stds[j];
                prop_assert!((scaled.row(i)[j] - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn class_one_metrics_ignore_irrelevant_cells(tp in 0u64..40, fp in 0u64..40, fn_ in 0u64..40, tn in 0u64..40, extra in 1u64..20) {
        let build = |tp: u64, fp: u64, fn_: u64, tn: u64| {
            let mut pred = Vec::new();
            let mut actual = Vec::new();
            for (p, a, k) in [(1u8, 1u8, tp), (1, 0, fp), (0, 1, fn_), (0, 0, tn)] {
                pred.extend(std::iter::repeat_n(p, k as usize));
                actual.extend(std::iter::repeat_n(a, k as usize));
            }
            (pred, actual)
        };
        prop_assume!(tp + fp + fn_ + tn > 0);
        let (p, a) = build(tp, fp, fn_, tn);
        let base = evaluate(&p, &a).unwrap();
        let cm = confusion(&p, &a, 1).unwrap();
        prop_assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (tp, fp, fn_, tn));

        let (p2, a2) = build(tp, fp + extra, fn_, tn + extra);
        prop_assert_eq!(evaluate(&p2, &a2).unwrap().class1.recall, base.class1.recall);
        let (p3, a3) = build(tp, fp, fn_ + extra, tn + extra);
        prop_assert_eq!(evaluate(&p3, &a3).unwrap().class1.precision, base.class1.precision);

        for m in [base.class0, base.class1] {
            if let (Some(pr), Some(r), Some(f1)) = (m.precision, m.recall, m.f1) {
                prop_assert!((f1 * (pr + r) - 2.0 * pr * r).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&f1));
            }
        }
    }

    #[test]
    fn tree_ignores_row_order((rows, labels) in labelled_rows(3), perm_seed in any::<u64>()) {
        let ds = dataset(&rows, &labels);
        let cfg = TrainConfig { max_depth: 6, min_leaf_size: 1, ..TrainConfig::default() };
        let tree = fit_tree(&ds, &cfg, None).unwrap();
        let mut order: Vec<usize> = (0..ds.row_count()).collect();
        let mut s = perm_seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = fit_tree(&ds.subset(&order), &cfg, None).unwrap();
        prop_assert_eq!(tree.predict(ds.features()), shuffled.predict(ds.features()));
    }

    #[test]
    fn tree_ignores_monotone_feature_transforms((rows, labels) in labelled_rows(2)) {
        let ds = dataset(&rows, &labels);
        let cfg = TrainConfig { max_depth: 6, min_leaf_size: 1, ..TrainConfig::default() };
        let warp = |v: f64| (v / 4.0).exp() + v;
        let warped: Vec<Vec<f64>> = rows.iter().map(|r| vec![warp(r[0]), r[1]]).collect();
        let a = fit_tree(&ds, &cfg, None).unwrap();
        let b = fit_tree(&dataset(&warped, &labels), &cfg, None).unwrap();
        prop_assert_eq!(a.predict(ds.features()), b.predict(&Matrix::from_rows(&warped).unwrap()));
    }

    #[test]
    fn logistic_objective_never_rises((rows, labels) in labelled_rows(3)) {
        let ds = dataset(&rows, &labels);
        let (_, trace) = fit_logistic_traced(&ds, &TrainConfig { epochs: 200, ..TrainConfig::default() }).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn smote_rows_stay_inside_their_segment_box(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 3..30),
        seed in any::<u64>(),
    ) {
        let minority = Matrix::from_rows(&rows).unwrap();
        let schema: Vec<_> = (0..4).map(|j| ColumnSchema::feature(format!("f{j}"), FeatureKind::Continuous)).collect();
        let cfg = SmoteConfig { n_samples: 50, seed, ..SmoteConfig::default() };
        let out = generate_smote(&minority, &schema, &cfg).unwrap();
        prop_assert!(out.batch.labels.iter().all(|&l| l == 1));
        for (r, prov) in out.batch.rows.iter_rows().zip(&out.batch.provenance) {
            let (a, b) = (&rows[prov.base_index.unwrap()], &rows[prov.neighbor_index.unwrap()]);
            for j in 0..4 {
                prop_assert!(r[j] >= a[j].min(b[j]) && r[j] <= a[j].max(b[j]));
            }
        }
        let again = generate_smote(&minority, &schema, &cfg).unwrap();
        prop_assert_eq!(out.batch.rows.as_slice(), again.batch.rows.as_slice());
    }

    #[test]
    fn ks_is_symmetric_and_bounded(
        a in prop::collection::vec(-3.0f64..3.0, 1..80),
        b in prop::collection::vec(-3.0f64..3.0, 1..80),
    ) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
    }

    #[test]
    fn pca_reconstructs_rank_two_data(
        coords in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 6..40),
        dirs in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let (u, v) = (&dirs[..5], &dirs[5..]);
        // keep the two directions clearly independent
        let cross: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let (nu, nv) = (u.iter().map(|x| x * x).sum::<f64>(), v.iter().map(|x| x * x).sum::<f64>());
        prop_assume!(nu > 0.1 && nv > 0.1 && cross * cross < 0.8 * nu * nv);
        let rows: Vec<Vec<f64>> = coords.iter().map(|&(s, t)| (0..5).map(|j| 1.0 + s * u[j] + t * v[j]).collect()).collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let model = pca_fit(&data, 2).unwrap();
        let proj = pca_project(&model, &data).unwrap();
        for (i, r) in rows.iter().enumerate() {
            for j in 0..5 {
                let back = model.means[j] + (0..2).map(|c| proj.get(i, c) * model.components.get(c, j)).sum::<f64>();
                prop_assert!((back - r[j]).abs() <= 1e-9, "row {i} col {j}: {back} vs {}", r[j]);
            }
        }
    }
}
