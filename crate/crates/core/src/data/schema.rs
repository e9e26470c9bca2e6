use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// How a column's values are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    /// Integer codes in `0..cardinality`.
    Categorical {
        cardinality: u32,
    },
    /// Exactly `{0, 1}`.
    Binary,
}

impl FeatureKind {
    /// Number of distinct levels for discrete kinds, `None` for continuous.
    pub fn levels(&self) -> Option<usize> {
        match self {
            FeatureKind::Continuous => None,
            FeatureKind::Categorical { cardinality } => Some(*cardinality as usize),
            FeatureKind::Binary => Some(2),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, FeatureKind::Continuous)
    }

    /// Checks a single value against the kind.
    pub fn admits(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            FeatureKind::Continuous => true,
            FeatureKind::Binary => v == 0.0 || v == 1.0,
            FeatureKind::Categorical { cardinality } => {
                v >= 0.0 && v < *cardinality as f64 && v == crate::math::floor(v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Feature,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    pub role: Role,
}

impl ColumnSchema {
    pub fn feature(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
            role: Role::Feature,
        }
    }

    pub fn label(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Binary,
            role: Role::Label,
        }
    }
}

/// Validates a full column list: unique names, exactly one binary label,
/// categorical cardinality at least 2.
pub fn validate_columns(columns: &[ColumnSchema]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in columns {
        if !seen.insert(c.name.as_str()) {
            bail!(Schema, "duplicate column name `{}`", c.name);
        }
        if let FeatureKind::Categorical { cardinality } = c.kind {
            if cardinality < 2 {
                bail!(
                    Schema,
                    "categorical column `{}` has cardinality {cardinality} < 2",
                    c.name
                );
            }
        }
    }
    let labels: Vec<&ColumnSchema> = columns.iter().filter(|c| c.role == Role::Label).collect();
    match labels.as_slice() {
        [one] if one.kind == FeatureKind::Binary => Ok(()),
        [one] => Err(Error::Schema(alloc::format!(
            "label column `{}` must be binary",
            one.name
        ))),
        [] => Err(Error::Schema("no label column".into())),
        _ => Err(Error::Schema("more than one label column".into())),
    }
}
