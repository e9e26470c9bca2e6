//! The single JSON run configuration. Command-line flags override its
//! values; the merged result is echoed into every manifest.

use std::path::PathBuf;

use rarebreak_core::classifiers::{ModelKind, TrainConfig};
use rarebreak_core::ctgan::CtganConfig;
use rarebreak_core::data::InferOptions;
use rarebreak_core::fidelity::{StructureThresholds, TsneConfig};
use rarebreak_core::pipeline::{PipelineConfig, SelectionMetric, TARGET_RATIO};
use rarebreak_core::smote::SmoteConfig;
use rarebreak_core::synthetic::Technique;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalerSection {
    /// Standardise continuous columns with statistics from the training rows.
    pub enabled: bool,
}

impl Default for ScalerSection {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub techniques: Vec<Technique>,
    pub max_techniques: usize,
    pub metric: SelectionMetric,
    pub models: Vec<ModelKind>,
    pub n_trials: usize,
    pub imbalance_threshold: f64,
    pub target_ratio: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            techniques: p.techniques,
            max_techniques: p.max_techniques,
            metric: p.metric,
            models: p.models,
            n_trials: p.n_trials,
            imbalance_threshold: p.imbalance_threshold,
            target_ratio: TARGET_RATIO,
        }
    }
}

/// Attribution settings for `explain` and for the pipeline bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub background: usize,
    pub permutations: usize,
    /// Instances explained per class.
    pub max_instances: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            background: 50,
            permutations: 20,
            max_instances: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub svg: bool,
    pub tsne: TsneConfig,
    /// Skip t-SNE curves (the exact algorithm is quadratic in rows).
    pub skip_tsne: bool,
    pub explain: ExplainSection,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            svg: true,
            tsne: TsneConfig {
                max_rows: 600,
                ..TsneConfig::default()
            },
            skip_tsne: false,
            explain: ExplainSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub label: String,
    pub categorical_max: usize,
    pub split: SplitSection,
    pub scaler: ScalerSection,
    pub train: TrainConfig,
    pub smote: SmoteConfig,
    pub ctgan: CtganConfig,
    pub thresholds: StructureThresholds,
    pub pipeline: PipelineSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            schema: None,
            out: None,
            seed: 0,
            label: "y".into(),
            categorical_max: 32,
            split: SplitSection::default(),
            scaler: ScalerSection::default(),
            train: TrainConfig::default(),
            smote: SmoteConfig::default(),
            ctgan: CtganConfig::default(),
            thresholds: StructureThresholds::default(),
            pipeline: PipelineSection::default(),
            report: ReportSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn infer_options(&self) -> InferOptions {
        InferOptions {
            categorical_max: self.categorical_max,
            label_name: self.label.clone(),
        }
    }

    /// Pushes the global seed into every seeded section.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.smote.seed = seed;
        self.ctgan.seed = seed;
        self.report.tsne.seed = seed;
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            techniques: self.pipeline.techniques.clone(),
            max_techniques: self.pipeline.max_techniques,
            metric: self.pipeline.metric,
            models: self.pipeline.models.clone(),
            n_trials: self.pipeline.n_trials,
            seed: self.seed,
            test_fraction: self.split.test_fraction,
            stratified: self.split.stratified,
            scale: self.scaler.enabled,
            imbalance_threshold: self.pipeline.imbalance_threshold,
            target_ratio: self.pipeline.target_ratio,
            train: self.train.clone(),
            smote: self.smote.clone(),
            ctgan: self.ctgan.clone(),
            thresholds: self.thresholds.clone(),
        }
    }

    /// Checks section invariants and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        self.pipeline_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for p in [&self.input, &self.schema].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
