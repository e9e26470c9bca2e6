use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::schema::{validate_columns, ColumnSchema, FeatureKind, Role};
use crate::error::{bail, Error, Result};

/// Knobs for [`infer_schema`].
#[derive(Debug, Clone, PartialEq)]
pub struct InferOptions {
    /// Integer-valued columns with at most this many distinct values are categorical.
    pub categorical_max: usize,
    pub label_name: String,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self {
            categorical_max: 32,
            label_name: "y".into(),
        }
    }
}

/// Types each column from a sample of already-parsed rows.
///
/// Values drawn only from `{0, 1}` make a binary column; non-negative integers
/// with few distinct values make a categorical one (cardinality = max code + 1);
/// everything else is continuous. The column named `opts.label_name` becomes
/// the label and must be binary.
pub fn infer_schema(
    header: &[String],
    sample_rows: &[Vec<f64>],
    opts: &InferOptions,
) -> Result<Vec<ColumnSchema>> {
    if header.is_empty() {
        bail!(Schema, "empty header");
    }
    let mut names = BTreeSet::new();
    for h in header {
        if !names.insert(h.as_str()) {
            bail!(Schema, "duplicate column name `{h}`");
        }
    }
    for (i, row) in sample_rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::Parse {
                row: i,
                column: String::new(),
                message: alloc::format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: i,
                column: header[j].clone(),
                message: "non-finite value".into(),
            });
        }
    }

    let mut columns = Vec::with_capacity(header.len());
    for (j, name) in header.iter().enumerate() {
        let kind = infer_kind(sample_rows.iter().map(|r| r[j]), opts.categorical_max);
        if *name == opts.label_name {
            if sample_rows.is_empty() || kind == FeatureKind::Binary {
                columns.push(ColumnSchema::label(name.clone()));
            } else {
                bail!(Schema, "label column `{name}` is not binary 0/1");
            }
        } else {
            columns.push(ColumnSchema {
                name: name.clone(),
                kind,
                role: Role::Feature,
            });
        }
    }
    validate_columns(&columns)?;
    Ok(columns)
}

fn infer_kind(values: impl Iterator<Item = f64>, categorical_max: usize) -> FeatureKind {
    let mut distinct: BTreeSet<u64> = BTreeSet::new();
    let mut integral = true;
    let mut max_code = 0.0f64;
    let mut saw_any = false;
    let mut overflow = false;
    for v in values {
        saw_any = true;
        if v < 0.0 || v != crate::math::floor(v) || v > u32::MAX as f64 {
            integral = false;
        } else {
            max_code = max_code.max(v);
        }
        if !overflow {
            distinct.insert(v.to_bits());
            if distinct.len() > categorical_max.max(2) {
                overflow = true;
            }
        }
    }
    if !saw_any {
        return FeatureKind::Continuous;
    }
    let zero = 0.0f64.to_bits();
    let one = 1.0f64.to_bits();
    if !overflow && distinct.iter().all(|&b| b == zero || b == one) {
        return FeatureKind::Binary;
    }
    if integral && !overflow && distinct.len() <= categorical_max && max_code >= 1.0 {
        return FeatureKind::Categorical {
            cardinality: max_code as u32 + 1,
        };
    }
    FeatureKind::Continuous
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn h(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn label_and_continuous() {
        let rows = vec![vec![0.0, 0.3], vec![1.0, -1.2], vec![0.0, 4.4]];
        let cols = infer_schema(&h(&["y", "x1"]), &rows, &InferOptions::default()).unwrap();
        assert_eq!(cols[0], ColumnSchema::label("y"));
        assert_eq!(cols[1].kind, FeatureKind::Continuous);
        assert_eq!(cols[1].role, Role::Feature);
    }

    #[test]
    fn ten_codes_are_categorical() {
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![(i % 2) as f64, (i % 10) as f64])
            .collect();
        let cols = infer_schema(&h(&["y", "x28"]), &rows, &InferOptions::default()).unwrap();
        assert_eq!(cols[1].kind, FeatureKind::Categorical { cardinality: 10 });
    }

    #[test]
    fn many_integers_are_continuous() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![0.0, i as f64]).collect();
        let cols = infer_schema(&h(&["y", "x"]), &rows, &InferOptions::default()).unwrap();
        assert_eq!(cols[1].kind, FeatureKind::Continuous);
    }

    #[test]
    fn negative_integers_are_continuous() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![0.0, -((i % 3) as f64)]).collect();
        let cols = infer_schema(&h(&["y", "x"]), &rows, &InferOptions::default()).unwrap();
        assert_eq!(cols[1].kind, FeatureKind::Continuous);
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(matches!(
            infer_schema(&h(&["y", "x", "x"]), &[], &InferOptions::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn header_only_still_types() {
        let cols = infer_schema(&h(&["y", "x1"]), &[], &InferOptions::default()).unwrap();
        assert_eq!(cols[0].role, Role::Label);
        assert_eq!(cols[1].kind, FeatureKind::Continuous);
    }

    #[test]
    fn custom_label_name() {
        let rows = vec![vec![0.5, 1.0], vec![0.7, 0.0]];
        let opts = InferOptions {
            label_name: "break".into(),
            ..InferOptions::default()
        };
        let cols = infer_schema(&h(&["x", "break"]), &rows, &opts).unwrap();
        assert_eq!(cols[1].role, Role::Label);
    }

    #[test]
    fn non_binary_label_rejected() {
        let rows = vec![vec![2.0], vec![0.0]];
        assert!(infer_schema(&h(&["y"]), &rows, &InferOptions::default()).is_err());
    }
}
