//! Confusion matrices and per-class precision, recall, F1 and overall accuracy.
//!
//! An undefined ratio (zero denominator) is `None` and serializes as `null`;
//! it is never coerced to 0 or 1.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub positive_class: u8,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same predictions read with the other class as positive.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
            positive_class: 1 - self.positive_class,
        }
    }
}

pub fn confusion(predicted: &[u8], actual: &[u8], positive_class: u8) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        bail!(
            Shape,
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        );
    }
    if predicted.is_empty() {
        bail!(Shape, "no predictions");
    }
    if positive_class > 1 {
        bail!(Domain, "positive class {positive_class} is not 0 or 1");
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
        positive_class,
    };
    for (&p, &a) in predicted.iter().zip(actual) {
        if p > 1 || a > 1 {
            bail!(Domain, "label pair ({p}, {a}) outside {{0, 1}}");
        }
        match (p == positive_class, a == positive_class) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub class0: ClassMetrics,
    pub class1: ClassMetrics,
    pub overall_accuracy: f64,
}

impl MetricsSummary {
    pub fn class(&self, c: u8) -> &ClassMetrics {
        if c == 0 {
            &self.class0
        } else {
            &self.class1
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: cm.tp + cm.fn_,
    }
}

/// Both class orientations plus overall accuracy.
pub fn summarize(cm: &ConfusionMatrix) -> MetricsSummary {
    let (for1, for0) = if cm.positive_class == 1 {
        (*cm, cm.swapped())
    } else {
        (cm.swapped(), *cm)
    };
    let total = cm.total();
    MetricsSummary {
        class0: class_metrics(&for0),
        class1: class_metrics(&for1),
        overall_accuracy: if total == 0 {
            0.0
        } else {
            (cm.tp + cm.tn) as f64 / total as f64
        },
    }
}

/// `confusion` with class 1 positive, then `summarize`.
pub fn evaluate(predicted: &[u8], actual: &[u8]) -> Result<MetricsSummary> {
    confusion(predicted, actual, 1).map(|cm| summarize(&cm))
}
