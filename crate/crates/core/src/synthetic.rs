use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Smote,
    Ctgan,
}

impl Technique {
    pub fn name(&self) -> &'static str {
        match self {
            Technique::Smote => "smote",
            Technique::Ctgan => "ctgan",
        }
    }
}

/// Where one synthetic row came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub technique: Technique,
    pub base_index: Option<usize>,
    pub neighbor_index: Option<usize>,
    pub lambda: Option<f64>,
    pub seed: u64,
}

/// Generated minority rows with per-row provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBatch {
    pub rows: Matrix,
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
}

impl SyntheticBatch {
    pub fn empty(width: usize) -> Self {
        Self {
            rows: Matrix::with_width(width),
            labels: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Synthetic rows needed so that `minority / majority` reaches `ratio`,
/// taking the floor of `ratio * majority` as the minority target.
pub fn samples_to_reach_ratio(minority: usize, majority: usize, ratio: f64) -> usize {
    let target = crate::math::floor(ratio * majority as f64) as usize;
    target.saturating_sub(minority)
}
