//! CSV datasets, JSON schema sidecars and JSON documents.
//!
//! Data files are plain comma-separated numbers under a header row. A schema
//! sidecar is a JSON object keyed by column name, each entry holding
//! `kind`, optional `cardinality`, and `role`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rarebreak_core::data::{
    infer_schema, ColumnSchema, FeatureKind, InferOptions, Role, TabularDataset,
};
use rarebreak_core::synthetic::SyntheticBatch;
use rarebreak_core::{Error as CoreError, Matrix};
use serde::de::DeserializeOwned;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarEntry {
    kind: SidecarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cardinality: Option<u32>,
    #[serde(default = "feature_role")]
    role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SidecarKind {
    Continuous,
    Categorical,
    Binary,
}

fn feature_role() -> Role {
    Role::Feature
}

impl From<&ColumnSchema> for SidecarEntry {
    fn from(c: &ColumnSchema) -> Self {
        let (kind, cardinality) = match c.kind {
            FeatureKind::Continuous => (SidecarKind::Continuous, None),
            FeatureKind::Categorical { cardinality } => {
                (SidecarKind::Categorical, Some(cardinality))
            }
            FeatureKind::Binary => (SidecarKind::Binary, None),
        };
        Self {
            kind,
            cardinality,
            role: c.role,
        }
    }
}

impl SidecarEntry {
    fn to_column(self, name: &str) -> Result<ColumnSchema> {
        let kind = match (self.kind, self.cardinality) {
            (SidecarKind::Continuous, None) => FeatureKind::Continuous,
            (SidecarKind::Binary, None) => FeatureKind::Binary,
            (SidecarKind::Categorical, Some(cardinality)) => {
                FeatureKind::Categorical { cardinality }
            }
            (SidecarKind::Categorical, None) => {
                return Err(CoreError::Schema(format!(
                    "categorical column `{name}` needs a cardinality"
                ))
                .into())
            }
            (_, Some(_)) => {
                return Err(CoreError::Schema(format!(
                    "column `{name}`: cardinality only applies to categorical"
                ))
                .into())
            }
        };
        Ok(ColumnSchema {
            name: name.to_string(),
            kind,
            role: self.role,
        })
    }
}

/// Column list in file order, serialized as a name-keyed object.
struct SidecarOut<'a>(&'a [ColumnSchema]);

impl Serialize for SidecarOut<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for c in self.0 {
            m.serialize_entry(&c.name, &SidecarEntry::from(c))?;
        }
        m.end()
    }
}

pub fn schema_to_json(columns: &[ColumnSchema]) -> String {
    serde_json::to_string_pretty(&SidecarOut(columns)).expect("schema serializes")
}

pub fn write_schema(path: &Path, columns: &[ColumnSchema]) -> Result<()> {
    write_text(path, &schema_to_json(columns))
}

/// Reads a sidecar and orders its columns by `header`.
pub fn read_schema(path: &Path, header: &[String]) -> Result<Vec<ColumnSchema>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let map: BTreeMap<String, SidecarEntry> = serde_json::from_str(&text)
        .map_err(|e| CoreError::Schema(format!("{}: {e}", path.display())))?;
    order_schema(map, header)
}

fn order_schema(
    mut map: BTreeMap<String, SidecarEntry>,
    header: &[String],
) -> Result<Vec<ColumnSchema>> {
    let mut cols = Vec::with_capacity(header.len());
    for name in header {
        let entry = map
            .remove(name)
            .ok_or_else(|| CoreError::Schema(format!("column `{name}` missing from schema")))?;
        cols.push(entry.to_column(name)?);
    }
    if let Some(extra) = map.keys().next() {
        return Err(CoreError::Schema(format!(
            "schema names column `{extra}` absent from the data"
        ))
        .into());
    }
    Ok(cols)
}

/// Header and numeric rows of a CSV file. Parse errors name the 1-based
/// file line and the column.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CoreError::Schema(format!("{}: missing header row", path.display())).into());
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(rows.len() + 2, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(CoreError::Parse {
                row: line,
                column: String::new(),
                message: format!("{} fields, header has {}", rec.len(), header.len()),
            }
            .into());
        }
        let mut row = Vec::with_capacity(header.len());
        for (field, name) in rec.iter().zip(&header) {
            let v: f64 = field.parse().map_err(|_| CoreError::Parse {
                row: line,
                column: name.clone(),
                message: format!("`{field}` is not a number"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => CoreError::Parse {
            row: line,
            column: String::new(),
            message: format!("{len} fields, header has {expected_len}"),
        }
        .into(),
        other => CoreError::Parse {
            row: line,
            column: String::new(),
            message: format!("{other:?}"),
        }
        .into(),
    }
}

/// Assembles a dataset from parsed rows, splitting off the label column.
pub fn dataset_from_rows(columns: Vec<ColumnSchema>, rows: &[Vec<f64>]) -> Result<TabularDataset> {
    let label = columns
        .iter()
        .position(|c| c.role == Role::Label)
        .ok_or_else(|| CoreError::Schema("no label column".into()))?;
    let width = columns.len() - 1;
    let mut data = Vec::with_capacity(rows.len() * width);
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let y = r[label];
        if y != 0.0 && y != 1.0 {
            return Err(
                CoreError::Schema(format!("row {}: label {y} is not 0 or 1", i + 2)).into(),
            );
        }
        labels.push(y as u8);
        data.extend(
            r.iter()
                .enumerate()
                .filter(|&(j, _)| j != label)
                .map(|(_, v)| *v),
        );
    }
    let features = Matrix::from_vec(rows.len(), width, data)?;
    Ok(TabularDataset::new(columns, features, labels)?)
}

/// Loads a CSV dataset. Without a schema the column kinds are inferred from
/// all rows.
pub fn load_csv(path: &Path, schema: Option<&Path>, opts: &InferOptions) -> Result<TabularDataset> {
    let (header, rows) = read_table(path)?;
    let columns = match schema {
        Some(s) => read_schema(s, &header)?,
        None => infer_schema(&header, &rows, opts)?,
    };
    dataset_from_rows(columns, &rows)
}

/// Writes the dataset in schema column order. `f64` display output is the
/// shortest string that parses back to the same value, so the round trip is
/// bit-exact.
pub fn write_csv(path: &Path, ds: &TabularDataset) -> Result<()> {
    let label = ds.label_position();
    let mut buf = String::new();
    let names: Vec<&str> = ds.columns().iter().map(|c| c.name.as_str()).collect();
    buf.push_str(&names.join(","));
    buf.push('\n');
    for i in 0..ds.row_count() {
        let mut feats = ds.row(i).iter();
        for j in 0..ds.columns().len() {
            if j > 0 {
                buf.push(',');
            }
            if j == label {
                buf.push_str(&ds.labels()[i].to_string());
            } else {
                buf.push_str(&feats.next().expect("feature value").to_string());
            }
        }
        buf.push('\n');
    }
    write_text(path, &buf)
}

/// Synthetic rows as a dataset with the real data's schema.
pub fn batch_dataset(template: &TabularDataset, batch: &SyntheticBatch) -> Result<TabularDataset> {
    Ok(TabularDataset::new(
        template.columns().to_vec(),
        batch.rows.clone(),
        batch.labels.clone(),
    )?)
}

/// Batch CSV plus a provenance JSON sidecar next to it.
pub fn write_batch(
    csv_path: &Path,
    provenance_path: &Path,
    template: &TabularDataset,
    batch: &SyntheticBatch,
) -> Result<()> {
    write_csv(csv_path, &batch_dataset(template, batch)?)?;
    write_json(provenance_path, &batch.provenance)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

/// Reads a JSON document; malformed content is a configuration error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
