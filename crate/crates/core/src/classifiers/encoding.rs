use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnSchema, FeatureKind};

/// Expands categorical columns into one-hot indicators; other columns map to
/// a single design column each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLayout {
    /// For each raw feature: first design column and number of design columns.
    spans: Vec<(usize, usize)>,
    categorical: Vec<bool>,
    names: Vec<String>,
    width: usize,
}

impl DesignLayout {
    pub fn new(features: &[ColumnSchema]) -> Self {
        let mut spans = Vec::with_capacity(features.len());
        let mut categorical = Vec::with_capacity(features.len());
        let mut names = Vec::new();
        let mut width = 0;
        for c in features {
            match c.kind {
                FeatureKind::Categorical { cardinality } => {
                    spans.push((width, cardinality as usize));
                    categorical.push(true);
                    for k in 0..cardinality {
                        names.push(format!("{}={k}", c.name));
                    }
                    width += cardinality as usize;
                }
                _ => {
                    spans.push((width, 1));
                    categorical.push(false);
                    names.push(c.name.clone());
                    width += 1;
                }
            }
        }
        Self {
            spans,
            categorical,
            names,
            width,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_raw(&self) -> usize {
        self.spans.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Raw feature index owning each design column.
    pub fn owner(&self, design_col: usize) -> usize {
        self.spans
            .iter()
            .position(|&(s, w)| design_col >= s && design_col < s + w)
            .expect("design column in range")
    }

    pub fn expand_into(&self, row: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, (&(start, w), &cat)) in self.spans.iter().zip(&self.categorical).enumerate() {
            if cat {
                let code = row[j] as usize;
                if code < w {
                    out[start + code] = 1.0;
                }
            } else {
                out[start] = row[j];
            }
        }
    }

    pub fn expand(&self, row: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.width];
        self.expand_into(row, &mut out);
        out
    }

    /// Dot product of a raw row with design-space weights, without materialising the expansion.
    pub fn dot(&self, row: &[f64], weights: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (j, (&(start, w), &cat)) in self.spans.iter().zip(&self.categorical).enumerate() {
            if cat {
                let code = row[j] as usize;
                if code < w {
                    acc += weights[start + code];
                }
            } else {
                acc += row[j] * weights[start];
            }
        }
        acc
    }
}
