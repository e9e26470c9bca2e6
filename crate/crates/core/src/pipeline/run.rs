use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate_models, ModelEvaluation};
use super::select::{metric_median, select_best, BestModel, SelectionMetric};
use crate::classifiers::{ModelKind, TrainConfig};
use crate::ctgan::{sample, train_ctgan, CtganConfig};
use crate::data::{apply_scaler, fit_scaler, split, ScalerParams, TabularDataset};
use crate::error::{bail, Result};
use crate::fidelity::{structure_check, FidelityReport, StructureThresholds};
use crate::rng::derive_seed;
use crate::smote::{generate_smote, SmoteConfig};
use crate::synthetic::{samples_to_reach_ratio, SyntheticBatch, Technique};

/// Minority:majority ratio that augmentation aims for (four to ten).
pub const TARGET_RATIO: f64 = 0.403;

// Seed streams derived from the pipeline seed.
const SPLIT_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;
const AUGMENT_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub techniques: Vec<Technique>,
    pub max_techniques: usize,
    pub metric: SelectionMetric,
    pub models: Vec<ModelKind>,
    pub n_trials: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub stratified: bool,
    /// Standardise continuous columns with training-set statistics. When
    /// off, an identity scaler is used.
    pub scale: bool,
    /// Training data counts as imbalanced below this minority:majority ratio.
    pub imbalance_threshold: f64,
    pub target_ratio: f64,
    pub train: TrainConfig,
    pub smote: SmoteConfig,
    pub ctgan: CtganConfig,
    pub thresholds: StructureThresholds,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            techniques: alloc::vec![Technique::Smote, Technique::Ctgan],
            max_techniques: 2,
            metric: SelectionMetric::RecallClass1,
            models: ModelKind::ALL.to_vec(),
            n_trials: 25,
            seed: 0,
            test_fraction: 0.3,
            stratified: true,
            scale: true,
            imbalance_threshold: 0.5,
            target_ratio: TARGET_RATIO,
            train: TrainConfig::default(),
            smote: SmoteConfig::default(),
            ctgan: CtganConfig::default(),
            thresholds: StructureThresholds::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_techniques > self.techniques.len() {
            bail!(
                Config,
                "max_techniques {} exceeds the {} listed techniques",
                self.max_techniques,
                self.techniques.len()
            );
        }
        if self.models.is_empty() {
            bail!(Config, "model set is empty");
        }
        if self.n_trials == 0 {
            bail!(Config, "n_trials must be positive");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            bail!(Config, "test_fraction must lie in (0, 1)");
        }
        if !(self.imbalance_threshold > 0.0) || !(self.target_ratio > 0.0) {
            bail!(
                Config,
                "imbalance_threshold and target_ratio must be positive"
            );
        }
        self.train.validate()?;
        self.ctgan.validate()?;
        self.thresholds.validate()
    }
}

/// The split and the scaler fitted on its training half.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: TabularDataset,
    pub test: TabularDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub scaler: ScalerParams,
    /// Test set in scaled space, fixed for the whole run.
    pub test_scaled: TabularDataset,
}

pub fn prepare(ds: &TabularDataset, cfg: &PipelineConfig) -> Result<Prepared> {
    let s = split(
        ds,
        cfg.test_fraction,
        derive_seed(cfg.seed, SPLIT_STREAM),
        cfg.stratified,
    )?;
    let scaler = if cfg.scale {
        fit_scaler(&s.train)
    } else {
        let p = s.train.n_features();
        ScalerParams {
            means: alloc::vec![0.0; p],
            stds: alloc::vec![1.0; p],
        }
    };
    let test_scaled = apply_scaler(&s.test, &scaler)?;
    Ok(Prepared {
        train: s.train,
        test: s.test,
        train_indices: s.train_indices,
        test_indices: s.test_indices,
        scaler,
        test_scaled,
    })
}

/// True iff minority/majority < `threshold`. Single-class data counts as
/// imbalanced.
pub fn imbalance_test(train: &TabularDataset, threshold: f64) -> bool {
    let [n0, n1] = train.class_counts();
    let (lo, hi) = (n0.min(n1), n0.max(n1));
    lo == 0 || (lo as f64) / (hi as f64) < threshold
}

/// Synthetic class-1 rows that lift the real training set to `target_ratio`.
pub fn augment(
    train: &TabularDataset,
    technique: Technique,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<SyntheticBatch> {
    let [n0, n1] = train.class_counts();
    let count = samples_to_reach_ratio(n1, n0, cfg.target_ratio);
    if count == 0 {
        return Ok(SyntheticBatch::empty(train.n_features()));
    }
    match technique {
        Technique::Smote => {
            let (minority, _) = train.class_rows(1);
            let smote = SmoteConfig {
                n_samples: count,
                seed,
                minority_label: 1,
                ..cfg.smote.clone()
            };
            Ok(generate_smote(&minority, &train.feature_schema(), &smote)?.batch)
        }
        Technique::Ctgan => {
            let ctgan = CtganConfig {
                seed,
                ..cfg.ctgan.clone()
            };
            let model = train_ctgan(train, &ctgan)?;
            let label = train.label_column().name.clone();
            sample(&model, count, Some((&label, 1)), derive_seed(seed, 1))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub technique: Option<Technique>,
    /// Gate verdict on the batch this iteration trained with.
    pub fidelity: Option<FidelityReport>,
    pub synthetic_rows: usize,
    /// Training-set class counts (class 0, class 1).
    pub train_counts: [usize; 2],
    pub evaluations: Vec<ModelEvaluation>,
}

/// A batch that failed the structure check and stopped the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedAugmentation {
    pub iteration: usize,
    pub technique: Technique,
    pub fidelity: FidelityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBest {
    pub model: ModelKind,
    pub value: Option<f64>,
    pub iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub schema_version: u32,
    pub seed: u64,
    pub metric: SelectionMetric,
    pub test_counts: [usize; 2],
    pub records: Vec<IterationRecord>,
    /// Running best per model (strict improvement only).
    pub per_model_best: Vec<ModelBest>,
    pub gate_failed: bool,
    pub rejected: Option<RejectedAugmentation>,
    pub best_model: BestModel,
}

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// One generated batch and its gate verdict, as seen by an observer.
pub struct AugmentationEvent<'a> {
    /// Iteration that trains on this batch if it is accepted.
    pub iteration: usize,
    pub technique: Technique,
    /// The real training rows the batch was generated from.
    pub real_train: &'a TabularDataset,
    pub batch: &'a SyntheticBatch,
    pub fidelity: &'a FidelityReport,
}

pub fn run_pipeline(ds: &TabularDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    run_pipeline_observed(ds, cfg, |_| {})
}

/// [`run_pipeline`], calling `observe` for every batch that reaches the gate.
pub fn run_pipeline_observed<F: FnMut(&AugmentationEvent<'_>)>(
    ds: &TabularDataset,
    cfg: &PipelineConfig,
    mut observe: F,
) -> Result<PipelineResult> {
    cfg.validate()?;
    let prep = prepare(ds, cfg)?;
    let real = &prep.train;
    let mut per_model_best: Vec<ModelBest> = cfg
        .models
        .iter()
        .map(|&model| ModelBest {
            model,
            value: None,
            iteration: None,
        })
        .collect();
    let mut records = Vec::new();
    let mut rejected = None;

    // Training set for the pass about to run, with the batch that built it.
    let mut current: (TabularDataset, Option<(Technique, FidelityReport, usize)>) =
        (real.clone(), None);
    let mut i = 0;
    while i <= cfg.max_techniques {
        let (train, applied) = current;
        let scaled = apply_scaler(&train, &prep.scaler)?;
        let evaluations = evaluate_models(
            &scaled,
            &prep.test_scaled,
            &cfg.models,
            &cfg.train,
            cfg.n_trials,
            derive_seed(cfg.seed, EVAL_STREAM),
        )?;
        for (slot, eval) in per_model_best.iter_mut().zip(&evaluations) {
            if let Some(v) = metric_median(eval, cfg.metric) {
                if slot.value.is_none_or(|b| v > b) {
                    slot.value = Some(v);
                    slot.iteration = Some(i);
                }
            }
        }
        let (technique, fidelity, synthetic_rows) = match applied {
            Some((t, f, n)) => (Some(t), Some(f), n),
            None => (None, None, 0),
        };
        records.push(IterationRecord {
            iteration: i,
            technique,
            fidelity,
            synthetic_rows,
            train_counts: train.class_counts(),
            evaluations,
        });

        if i == cfg.max_techniques || !imbalance_test(real, cfg.imbalance_threshold) {
            break;
        }
        let technique = cfg.techniques[i];
        let batch = augment(
            real,
            technique,
            cfg,
            derive_seed(derive_seed(cfg.seed, AUGMENT_STREAM), i as u64),
        )?;
        if batch.is_empty() {
            break;
        }
        let report = structure_check(real, &batch, &cfg.thresholds)?;
        observe(&AugmentationEvent {
            iteration: i + 1,
            technique,
            real_train: real,
            batch: &batch,
            fidelity: &report,
        });
        if !report.pass {
            rejected = Some(RejectedAugmentation {
                iteration: i + 1,
                technique,
                fidelity: report,
            });
            break;
        }
        let n = batch.len();
        current = (
            real.append_rows(&batch.rows, 1)?,
            Some((technique, report, n)),
        );
        i += 1;
    }

    let best_model = select_best(&records, cfg.metric)?;
    Ok(PipelineResult {
        schema_version: RESULT_SCHEMA_VERSION,
        seed: cfg.seed,
        metric: cfg.metric,
        test_counts: prep.test.class_counts(),
        records,
        per_model_best,
        gate_failed: rejected.is_some(),
        rejected,
        best_model,
    })
}
