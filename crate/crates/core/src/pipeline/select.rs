use serde::{Deserialize, Serialize};

use super::evaluate::ModelEvaluation;
use super::run::IterationRecord;
use crate::classifiers::ModelKind;
use crate::error::{bail, Result};
use crate::synthetic::Technique;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    RecallClass1,
    F1Class1,
    Accuracy,
}

pub fn metric_median(eval: &ModelEvaluation, metric: SelectionMetric) -> Option<f64> {
    let d = &eval.distribution;
    match metric {
        SelectionMetric::RecallClass1 => d.recall_class1,
        SelectionMetric::F1Class1 => d.f1_class1,
        SelectionMetric::Accuracy => d.accuracy,
    }
    .map(|q| q.median)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub model: ModelKind,
    pub iteration: usize,
    pub technique: Option<Technique>,
    pub metric: SelectionMetric,
    pub value: f64,
}

/// Highest median metric over every (model, iteration). Ties go to the
/// higher class-1 precision median, then the higher class-0 recall median,
/// then model order RF, DT, LR, then the earlier iteration.
pub fn select_best(records: &[IterationRecord], metric: SelectionMetric) -> Result<BestModel> {
    let key = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
    let mut best: Option<(BestModel, f64, f64)> = None;
    for rec in records {
        for eval in &rec.evaluations {
            let Some(value) = metric_median(eval, metric) else {
                continue;
            };
            let prec = key(eval.distribution.precision_class1.map(|q| q.median));
            let rec0 = key(eval.distribution.recall_class0.map(|q| q.median));
            let candidate = BestModel {
                model: eval.model,
                iteration: rec.iteration,
                technique: rec.technique,
                metric,
                value,
            };
            let better = match &best {
                None => true,
                Some((b, bp, br)) => {
                    let order = value
                        .total_cmp(&b.value)
                        .then(prec.total_cmp(bp))
                        .then(rec0.total_cmp(br))
                        .then(b.model.cmp(&candidate.model))
                        .then(b.iteration.cmp(&candidate.iteration));
                    order == core::cmp::Ordering::Greater
                }
            };
            if better {
                best = Some((candidate, prec, rec0));
            }
        }
    }
    match best {
        Some((b, _, _)) => Ok(b),
        None => bail!(Selection, "no model has a defined {metric:?} median"),
    }
}
