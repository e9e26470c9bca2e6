//! The iterative train, evaluate, augment loop with a fidelity gate.
//!
//! Each pass evaluates every model on the current training set and, while
//! techniques remain and the real training set is imbalanced, builds the
//! next training set by augmenting the *real* training rows with the next
//! technique. Augmentations are siblings, never stacked. A batch that fails
//! the structure check stops the loop. Evaluation always precedes the
//! augmentation decision, and the pass counter advances on every pass, so
//! a run with `n` techniques performs at most `n + 1` evaluations.

mod evaluate;
mod run;
mod select;

pub use evaluate::{evaluate_models, MetricDistribution, ModelEvaluation, Quantiles};
pub use run::{
    augment, imbalance_test, prepare, run_pipeline, run_pipeline_observed, AugmentationEvent,
    IterationRecord, ModelBest, PipelineConfig, PipelineResult, Prepared, RejectedAugmentation,
    RESULT_SCHEMA_VERSION, TARGET_RATIO,
};
pub use select::{metric_median, select_best, BestModel, SelectionMetric};
