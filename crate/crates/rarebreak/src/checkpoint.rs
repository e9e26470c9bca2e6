//! Versioned JSON checkpoints for fitted classifiers and CTGAN models.

use std::path::Path;

use rarebreak_core::classifiers::{TrainConfig, TrainedModel};
use rarebreak_core::ctgan::CtganModel;
use rarebreak_core::data::{ColumnSchema, ScalerParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_json, write_json};

pub const CHECKPOINT_VERSION: u32 = 1;
const CLASSIFIER_FORMAT: &str = "rarebreak-classifier";
const CTGAN_FORMAT: &str = "rarebreak-ctgan";

/// A classifier with everything needed to score raw rows: the schema it was
/// fitted on and the scaler fitted on its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierCheckpoint {
    pub format: String,
    pub version: u32,
    pub columns: Vec<ColumnSchema>,
    pub scaler: ScalerParams,
    pub config: TrainConfig,
    pub model: TrainedModel,
}

impl ClassifierCheckpoint {
    pub fn new(
        columns: Vec<ColumnSchema>,
        scaler: ScalerParams,
        config: TrainConfig,
        model: TrainedModel,
    ) -> Self {
        Self {
            format: CLASSIFIER_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            columns,
            scaler,
            config,
            model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtganCheckpoint {
    pub format: String,
    pub version: u32,
    pub model: CtganModel,
}

impl CtganCheckpoint {
    pub fn new(model: CtganModel) -> Self {
        Self {
            format: CTGAN_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model,
        }
    }
}

fn check(path: &Path, format: &str, version: u32, want: &str) -> Result<()> {
    if format != want {
        return Err(CliError::Config(format!(
            "{}: expected a {want} checkpoint, found `{format}`",
            path.display()
        )));
    }
    if version != CHECKPOINT_VERSION {
        return Err(CliError::Config(format!(
            "{}: checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

pub fn save_classifier(path: &Path, ckpt: &ClassifierCheckpoint) -> Result<()> {
    write_json(path, ckpt)
}

/// Missing or malformed checkpoints are configuration errors.
pub fn load_classifier(path: &Path) -> Result<ClassifierCheckpoint> {
    let c: ClassifierCheckpoint = read_json(path)?;
    check(path, &c.format, c.version, CLASSIFIER_FORMAT)?;
    Ok(c)
}

pub fn save_ctgan(path: &Path, model: &CtganModel) -> Result<()> {
    write_json(path, &CtganCheckpoint::new(model.clone()))
}

pub fn load_ctgan(path: &Path) -> Result<CtganModel> {
    let c: CtganCheckpoint = read_json(path)?;
    check(path, &c.format, c.version, CTGAN_FORMAT)?;
    Ok(c.model)
}
