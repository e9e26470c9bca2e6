use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::schema::{validate_columns, ColumnSchema, Role};
use crate::error::{bail, Error, Result};
use crate::matrix::Matrix;

/// Feature matrix plus binary labels and the column schema they were read with.
///
/// The schema keeps file order (label included) so a dataset can be written back
/// with the same header; the feature matrix holds only the `Feature` columns, in
/// that same relative order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    columns: Vec<ColumnSchema>,
    features: Matrix,
    labels: Vec<u8>,
}

impl TabularDataset {
    pub fn new(columns: Vec<ColumnSchema>, features: Matrix, labels: Vec<u8>) -> Result<Self> {
        validate_columns(&columns)?;
        let ds = Self {
            columns,
            features,
            labels,
        };
        ds.check_values()?;
        Ok(ds)
    }

    fn check_values(&self) -> Result<()> {
        let feats: Vec<&ColumnSchema> = self.feature_columns().collect();
        if self.features.cols() != feats.len() {
            bail!(
                Shape,
                "feature matrix has {} columns, schema has {} features",
                self.features.cols(),
                feats.len()
            );
        }
        if self.features.rows() != self.labels.len() {
            bail!(
                Shape,
                "{} feature rows but {} labels",
                self.features.rows(),
                self.labels.len()
            );
        }
        for (i, row) in self.features.iter_rows().enumerate() {
            for (v, col) in row.iter().zip(&feats) {
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: i,
                        column: col.name.clone(),
                        message: format!("non-finite value {v}"),
                    });
                }
                if !col.kind.admits(*v) {
                    bail!(
                        Schema,
                        "row {i}: value {v} not valid for column `{}` ({:?})",
                        col.name,
                        col.kind
                    );
                }
            }
        }
        if let Some((i, l)) = self.labels.iter().enumerate().find(|(_, l)| **l > 1) {
            bail!(Schema, "row {i}: label {l} is not 0 or 1");
        }
        Ok(())
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &ColumnSchema> + Clone + '_ {
        self.columns.iter().filter(|c| c.role == Role::Feature)
    }

    pub fn feature_schema(&self) -> Vec<ColumnSchema> {
        self.feature_columns().cloned().collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_columns().map(|c| c.name.clone()).collect()
    }

    pub fn label_column(&self) -> &ColumnSchema {
        self.columns
            .iter()
            .find(|c| c.role == Role::Label)
            .expect("validated schema has a label")
    }

    /// Position of the label among all columns (file order).
    pub fn label_position(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.role == Role::Label)
            .expect("validated schema has a label")
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_count(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// `[count of class 0, count of class 1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Minority count divided by majority count (0 when one class is absent).
    pub fn minority_ratio(&self) -> f64 {
        let [a, b] = self.class_counts();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if hi == 0 {
            0.0
        } else {
            lo as f64 / hi as f64
        }
    }

    /// Rows of one class, as a matrix, plus their original indices.
    pub fn class_rows(&self, class: u8) -> (Matrix, Vec<usize>) {
        let idx: Vec<usize> = (0..self.row_count())
            .filter(|&i| self.labels[i] == class)
            .collect();
        (self.features.select_rows(&idx), idx)
    }

    /// New dataset from the listed row indices, same schema.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            columns: self.columns.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same schema, replaced feature values (used by scaling).
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        let ds = Self {
            columns: self.columns.clone(),
            features,
            labels: self.labels.clone(),
        };
        ds.check_values()?;
        Ok(ds)
    }

    /// Appends rows with a fixed label; values are validated against the schema.
    pub fn append_rows(&self, rows: &Matrix, label: u8) -> Result<Self> {
        let features = self.features.vstack(rows)?;
        let mut labels = self.labels.clone();
        labels.extend(core::iter::repeat_n(label, rows.rows()));
        let ds = Self {
            columns: self.columns.clone(),
            features,
            labels,
        };
        ds.check_values()?;
        Ok(ds)
    }
}
