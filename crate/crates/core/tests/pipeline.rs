use std::collections::HashSet;

use rarebreak_core::classifiers::{ModelKind, TrainConfig};
use rarebreak_core::data::{
    make_benchmark, BenchmarkSpec, ColumnSchema, FeatureKind, TabularDataset,
};
use rarebreak_core::metrics::{ClassMetrics, MetricsSummary};
use rarebreak_core::pipeline::*;
use rarebreak_core::synthetic::Technique;
use rarebreak_core::Matrix;

fn small_benchmark(seed: u64) -> TabularDataset {
    make_benchmark(&BenchmarkSpec {
        n_rows: 700,
        n_positives: 40,
        n_continuous: 5,
        n_categorical: 1,
        n_binary: 1,
        class_separation: 2.5,
        seed,
    })
    .unwrap()
}

fn quick_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed,
        n_trials: 3,
        ..Default::default()
    };
    cfg.train.n_trees = 8;
    cfg.train.max_depth = 6;
    cfg.train.epochs = 100;
    cfg.ctgan.epochs = 3;
    cfg.ctgan.batch_size = 100;
    cfg.ctgan.generator_hidden = vec![32];
    cfg.ctgan.discriminator_hidden = vec![32];
    cfg.ctgan.latent_dim = 16;
    cfg
}

// Piecewise-linear interpolation through (i / (n - 1), v[i]), found by
// scanning segments.
fn quantile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    for i in 0..n - 1 {
        let (x0, x1) = (i as f64 / (n - 1) as f64, (i + 1) as f64 / (n - 1) as f64);
        if q >= x0 && q <= x1 {
            return v[i] + (q - x0) / (x1 - x0) * (v[i + 1] - v[i]);
        }
    }
    v[n - 1]
}

fn summary(recall1: f64, precision1: f64, recall0: f64) -> MetricsSummary {
    let cm = |p: f64, r: f64| ClassMetrics {
        precision: Some(p),
        recall: Some(r),
        f1: Some(2.0 * p * r / (p + r)),
        support: 10,
    };
    MetricsSummary {
        class0: cm(0.9, recall0),
        class1: cm(precision1, recall1),
        overall_accuracy: 0.9,
    }
}

fn eval(model: ModelKind, trials: Vec<MetricsSummary>) -> ModelEvaluation {
    let distribution = MetricDistribution::from_trials(&trials);
    ModelEvaluation {
        model,
        trials,
        distribution,
    }
}

fn record(iteration: usize, evaluations: Vec<ModelEvaluation>) -> IterationRecord {
    IterationRecord {
        iteration,
        technique: None,
        fidelity: None,
        synthetic_rows: 0,
        train_counts: [0, 0],
        evaluations,
    }
}

#[test]
fn imbalance_boundaries() {
    let ds = |n0: usize, n1: usize| {
        let cols = vec![
            ColumnSchema::feature("x", FeatureKind::Continuous),
            ColumnSchema::label("y"),
        ];
        let rows: Vec<[f64; 1]> = (0..n0 + n1).map(|i| [i as f64]).collect();
        let labels = (0..n0 + n1).map(|i| (i >= n0) as u8).collect();
        TabularDataset::new(cols, Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    };
    assert!(imbalance_test(&ds(12_783, 95), 0.5));
    let near = ds(12_783, 5_151);
    assert!(!imbalance_test(&near, 0.40));
    assert!(imbalance_test(&near, 0.45));
    assert!(imbalance_test(&near, 0.5));
    assert!(!imbalance_test(&ds(50, 50), 0.5));
    assert!(imbalance_test(&ds(50, 0), 0.5));
}

#[test]
fn quantiles_match_oracle() {
    let values: Vec<f64> = (0..25).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
    let q = Quantiles::of(values.iter().map(|&v| Some(v))).unwrap();
    assert_eq!(q.count, 25);
    for (got, p) in [
        (q.min, 0.0),
        (q.q1, 0.25),
        (q.median, 0.5),
        (q.q3, 0.75),
        (q.max, 1.0),
    ] {
        assert!((got - quantile_oracle(&values, p)).abs() < 1e-12, "{p}");
    }
    assert!(Quantiles::of([None, None].into_iter()).is_none());
    let q = Quantiles::of([Some(1.0), None, Some(3.0)].into_iter()).unwrap();
    assert_eq!((q.count, q.median), (2, 2.0));
}

#[test]
fn singleton_selection() {
    let recs = vec![record(
        0,
        vec![eval(ModelKind::Dt, vec![summary(0.4, 0.5, 0.99)])],
    )];
    let b = select_best(&recs, SelectionMetric::RecallClass1).unwrap();
    assert_eq!((b.model, b.iteration, b.value), (ModelKind::Dt, 0, 0.4));
}

#[test]
fn ties_break_by_precision_then_recall0_then_model_then_iteration() {
    let recs = vec![record(
        0,
        vec![
            eval(ModelKind::Rf, vec![summary(0.6, 0.5, 0.99)]),
            eval(ModelKind::Lr, vec![summary(0.6, 0.7, 0.90)]),
        ],
    )];
    assert_eq!(
        select_best(&recs, SelectionMetric::RecallClass1)
            .unwrap()
            .model,
        ModelKind::Lr
    );

    let recs = vec![record(
        0,
        vec![
            eval(ModelKind::Rf, vec![summary(0.6, 0.7, 0.95)]),
            eval(ModelKind::Lr, vec![summary(0.6, 0.7, 0.97)]),
        ],
    )];
    assert_eq!(
        select_best(&recs, SelectionMetric::RecallClass1)
            .unwrap()
            .model,
        ModelKind::Lr
    );

    let same = || summary(0.6, 0.7, 0.97);
    let recs = vec![record(
        0,
        vec![
            eval(ModelKind::Lr, vec![same()]),
            eval(ModelKind::Dt, vec![same()]),
            eval(ModelKind::Rf, vec![same()]),
        ],
    )];
    assert_eq!(
        select_best(&recs, SelectionMetric::RecallClass1)
            .unwrap()
            .model,
        ModelKind::Rf
    );

    let recs = vec![
        record(0, vec![eval(ModelKind::Dt, vec![same()])]),
        record(1, vec![eval(ModelKind::Dt, vec![same()])]),
    ];
    assert_eq!(
        select_best(&recs, SelectionMetric::RecallClass1)
            .unwrap()
            .iteration,
        0
    );
}

#[test]
fn all_null_metric_is_a_selection_error() {
    let mut s = summary(0.5, 0.5, 0.9);
    s.class1.recall = None;
    let recs = vec![record(0, vec![eval(ModelKind::Rf, vec![s])])];
    assert!(matches!(
        select_best(&recs, SelectionMetric::RecallClass1),
        Err(rarebreak_core::Error::Selection(_))
    ));
}

#[test]
fn selection_matches_exhaustive_scan() {
    // Coarse values force plenty of ties.
    let mut state = 12345u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) % 4) as f64 / 4.0 + 0.1
    };
    for _ in 0..200 {
        let recs: Vec<IterationRecord> = (0..3)
            .map(|it| {
                record(
                    it,
                    ModelKind::ALL
                        .iter()
                        .map(|&m| eval(m, vec![summary(next(), next(), next())]))
                        .collect(),
                )
            })
            .collect();
        let mut cands = Vec::new();
        for r in &recs {
            for e in &r.evaluations {
                let d = &e.distribution;
                cands.push((
                    d.recall_class1.unwrap().median,
                    d.precision_class1.unwrap().median,
                    d.recall_class0.unwrap().median,
                    e.model,
                    r.iteration,
                ));
            }
        }
        let top = cands.iter().map(|c| c.0).fold(f64::MIN, f64::max);
        cands.retain(|c| c.0 == top);
        let top = cands.iter().map(|c| c.1).fold(f64::MIN, f64::max);
        cands.retain(|c| c.1 == top);
        let top = cands.iter().map(|c| c.2).fold(f64::MIN, f64::max);
        cands.retain(|c| c.2 == top);
        let m = cands.iter().map(|c| c.3).min().unwrap();
        cands.retain(|c| c.3 == m);
        let it = cands.iter().map(|c| c.4).min().unwrap();
        let b = select_best(&recs, SelectionMetric::RecallClass1).unwrap();
        assert_eq!((b.model, b.iteration), (m, it));
    }
}

#[test]
fn deterministic_models_repeat_across_trials() {
    let ds = small_benchmark(3);
    let cfg = quick_config(3);
    let prep = prepare(&ds, &cfg).unwrap();
    let train = rarebreak_core::data::apply_scaler(&prep.train, &prep.scaler).unwrap();
    let evals =
        evaluate_models(&train, &prep.test_scaled, &ModelKind::ALL, &cfg.train, 5, 9).unwrap();
    for e in &evals {
        assert_eq!(e.trials.len(), 5);
        if e.model.is_deterministic() {
            assert!(e.trials.iter().all(|t| t == &e.trials[0]));
            let q = e.distribution.recall_class1.unwrap();
            assert_eq!(q.q3 - q.q1, 0.0);
        }
        let recalls: Vec<f64> = e.trials.iter().filter_map(|t| t.class1.recall).collect();
        let q = e.distribution.recall_class1.unwrap();
        assert!((q.median - quantile_oracle(&recalls, 0.5)).abs() < 1e-12);
    }
}

#[test]
fn evaluation_rejects_single_class_train() {
    let ds = small_benchmark(4);
    let (_, idx) = ds.class_rows(0);
    let only0 = ds.subset(&idx);
    let r = evaluate_models(&only0, &ds, &[ModelKind::Lr], &TrainConfig::default(), 2, 0);
    assert!(matches!(r, Err(rarebreak_core::Error::Training(_))));
}

#[test]
fn zero_techniques_gives_one_record() {
    let ds = small_benchmark(5);
    let cfg = PipelineConfig {
        max_techniques: 0,
        ..quick_config(5)
    };
    let r = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(r.records.len(), 1);
    assert_eq!(r.records[0].technique, None);
    assert_eq!(r.best_model.iteration, 0);
    assert!(!r.gate_failed);
}

#[test]
fn balanced_data_is_never_augmented() {
    let ds = make_benchmark(&BenchmarkSpec {
        n_rows: 400,
        n_positives: 200,
        n_continuous: 4,
        n_categorical: 0,
        n_binary: 1,
        class_separation: 1.5,
        seed: 6,
    })
    .unwrap();
    let r = run_pipeline(&ds, &quick_config(6)).unwrap();
    assert_eq!(r.records.len(), 1);
    assert!(r.rejected.is_none());
}

#[test]
fn terminates_within_bound_for_every_technique_count() {
    let ds = small_benchmark(7);
    for techniques in [
        vec![],
        vec![Technique::Smote],
        vec![Technique::Smote, Technique::Ctgan],
        vec![Technique::Ctgan],
    ] {
        for n in 0..=techniques.len() {
            let cfg = PipelineConfig {
                techniques: techniques.clone(),
                max_techniques: n,
                ..quick_config(7)
            };
            let r = run_pipeline(&ds, &cfg).unwrap();
            assert!(r.records.len() <= n + 1);
            assert!(!r.records.is_empty());
            for (i, rec) in r.records.iter().enumerate() {
                assert_eq!(rec.iteration, i);
                assert!(rec
                    .evaluations
                    .iter()
                    .all(|e| e.trials.len() == cfg.n_trials));
            }
            // A gate failure truncates the run but keeps what was completed.
            if let Some(rej) = &r.rejected {
                assert_eq!(rej.iteration, r.records.len());
                assert!(!rej.fidelity.pass);
            }
        }
    }
}

#[test]
fn siblings_augment_the_real_train_set() {
    let ds = small_benchmark(8);
    let mut cfg = quick_config(8);
    cfg.thresholds.max_ks_per_continuous = 1.0;
    cfg.thresholds.max_categorical_l1 = 1.0;
    cfg.thresholds.min_pca_overlap = 0.0;
    let r = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(r.records.len(), 3);
    let base = r.records[0].train_counts;
    let target = (0.403 * base[0] as f64).floor() as usize;
    for rec in &r.records[1..] {
        assert_eq!(rec.train_counts, [base[0], target]);
        assert_eq!(rec.synthetic_rows, target - base[1]);
        assert!(rec.fidelity.as_ref().unwrap().pass);
    }
    assert_eq!(r.records[1].technique, Some(Technique::Smote));
    assert_eq!(r.records[2].technique, Some(Technique::Ctgan));
}

#[test]
fn impossible_gate_stops_after_baseline() {
    let ds = small_benchmark(9);
    let mut cfg = quick_config(9);
    cfg.thresholds.max_ks_per_continuous = 0.0;
    cfg.thresholds.finite_sample_alpha = None;
    let r = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(r.records.len(), 1);
    assert!(r.gate_failed);
    assert_eq!(r.rejected.as_ref().unwrap().technique, Technique::Smote);
    assert_eq!(r.best_model.iteration, 0);
}

#[test]
fn serialized_result_is_reproducible() {
    let ds = small_benchmark(10);
    let cfg = quick_config(10);
    let a = serde_json::to_string(&run_pipeline(&ds, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_pipeline(&ds, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&run_pipeline(&ds, &quick_config(11)).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn no_test_row_reaches_scaler_or_augmentation() {
    let ds = small_benchmark(12);
    let cfg = quick_config(12);
    let prep = prepare(&ds, &cfg).unwrap();
    let train_ids: HashSet<usize> = prep.train_indices.iter().copied().collect();
    let test_ids: HashSet<usize> = prep.test_indices.iter().copied().collect();
    assert!(train_ids.is_disjoint(&test_ids));
    assert_eq!(train_ids.len() + test_ids.len(), ds.row_count());

    // Scaler statistics equal those of the training rows alone.
    let refit = rarebreak_core::data::fit_scaler(&ds.subset(&prep.train_indices));
    assert_eq!(prep.scaler, refit);

    // Every SMOTE parent is a training minority row.
    let (_, minority_pos) = prep.train.class_rows(1);
    let batch = augment(&prep.train, Technique::Smote, &cfg, 1).unwrap();
    assert!(!batch.is_empty());
    for p in &batch.provenance {
        for local in [p.base_index, p.neighbor_index].into_iter().flatten() {
            let source = prep.train_indices[minority_pos[local]];
            assert!(train_ids.contains(&source) && !test_ids.contains(&source));
        }
    }

    // Synthetic rows never coincide with a test row.
    let test_rows: HashSet<Vec<u64>> = (0..prep.test.row_count())
        .map(|i| prep.test.row(i).iter().map(|v| v.to_bits()).collect())
        .collect();
    for r in batch.rows.iter_rows() {
        let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
        assert!(!test_rows.contains(&key));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let ds = small_benchmark(13);
    for cfg in [
        PipelineConfig {
            max_techniques: 3,
            ..quick_config(0)
        },
        PipelineConfig {
            models: vec![],
            ..quick_config(0)
        },
        PipelineConfig {
            n_trials: 0,
            ..quick_config(0)
        },
    ] {
        assert!(matches!(
            run_pipeline(&ds, &cfg),
            Err(rarebreak_core::Error::Config(_))
        ));
    }
}
