//! Report bundles: every emitted file is recorded in a manifest with its
//! SHA-256 checksum. Curves are long-format CSV with columns
//! `series,x,y`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rarebreak_core::analysis::GlobalImportance;
use rarebreak_core::ctgan::EpochLoss;
use rarebreak_core::data::TabularDataset;
use rarebreak_core::fidelity::{ecdf, kde, pca_fit, pca_project, tsne, TsneConfig};
use rarebreak_core::pipeline::IterationRecord;
use rarebreak_core::synthetic::SyntheticBatch;
use rarebreak_core::Matrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io::{to_json, write_text};
use crate::svg;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the effective configuration JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    /// Seconds since the Unix epoch. Timestamps appear nowhere else.
    pub created_unix: u64,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files under one directory and remembers their checksums.
pub struct Bundle {
    root: PathBuf,
    files: Vec<ManifestEntry>,
}

impl Bundle {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            files: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn text(&mut self, rel: &str, content: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        write_text(&path, content)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len() as u64,
        });
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        self.text(rel, &to_json(value))
    }

    /// Registers a file written by other means.
    pub fn adopt(&mut self, rel: &str) -> Result<()> {
        let path = self.path(rel);
        let bytes = std::fs::read(&path).map_err(|e| crate::error::CliError::io(&path, e))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn files(&self) -> &[ManifestEntry] {
        &self.files
    }

    /// Writes the manifest and returns it.
    pub fn finish<C: Serialize>(self, command: &str, seed: u64, config: &C) -> Result<Manifest> {
        let config = serde_json::to_value(config).expect("config serializes");
        let config_hash = sha256_hex(
            serde_json::to_string(&config)
                .expect("value serializes")
                .as_bytes(),
        );
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let mut files = self.files;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_hash,
            config,
            created_unix,
            files,
        };
        write_text(&self.root.join(MANIFEST_NAME), &to_json(&manifest))?;
        Ok(manifest)
    }
}

/// Recomputes every checksum in a manifest; returns the paths that differ.
pub fn verify_manifest(root: &Path) -> Result<Vec<String>> {
    let m: Manifest = crate::io::read_json(&root.join(MANIFEST_NAME))?;
    let mut bad = Vec::new();
    for f in &m.files {
        match std::fs::read(root.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            _ => bad.push(f.path.clone()),
        }
    }
    Ok(bad)
}

/// A named series of points.
pub type Series = (String, Vec<(f64, f64)>);

pub fn series_csv(series: &[Series]) -> String {
    let mut s = String::from("series,x,y\n");
    for (name, pts) in series {
        for (x, y) in pts {
            let _ = writeln!(s, "{name},{x},{y}");
        }
    }
    s
}

/// Real minority rows and a synthetic batch, compared column by column and
/// in two projections.
pub struct Comparison<'a> {
    pub real: &'a TabularDataset,
    pub batch: &'a SyntheticBatch,
}

impl Comparison<'_> {
    fn minority(&self) -> Matrix {
        self.real.class_rows(1).0
    }

    fn continuous(&self) -> Vec<(usize, String)> {
        self.real
            .feature_columns()
            .enumerate()
            .filter(|(_, c)| c.kind.is_continuous())
            .map(|(j, c)| (j, c.name.clone()))
            .collect()
    }

    pub fn ecdf_series(&self) -> Result<Vec<Series>> {
        let minority = self.minority();
        let mut out = Vec::new();
        for (j, name) in self.continuous() {
            for (tag, m) in [("real", &minority), ("synthetic", &self.batch.rows)] {
                if m.rows() == 0 {
                    continue;
                }
                let c = ecdf(&m.column(j))?;
                out.push((
                    format!("{name}/{tag}"),
                    c.values
                        .iter()
                        .copied()
                        .zip(c.cumulative.iter().copied())
                        .collect(),
                ));
            }
        }
        Ok(out)
    }

    pub fn kde_series(&self) -> Result<Vec<Series>> {
        let minority = self.minority();
        let mut out = Vec::new();
        for (j, name) in self.continuous() {
            for (tag, m) in [("real", &minority), ("synthetic", &self.batch.rows)] {
                if m.rows() == 0 {
                    continue;
                }
                let c = kde(&m.column(j), None)?;
                out.push((
                    format!("{name}/{tag}"),
                    c.grid
                        .iter()
                        .copied()
                        .zip(c.density.iter().copied())
                        .collect(),
                ));
            }
        }
        Ok(out)
    }

    /// Both sets projected on the first two principal axes of the real rows.
    pub fn pca_series(&self) -> Result<Vec<Series>> {
        let minority = self.minority();
        let model = pca_fit(&minority, 2)?;
        let mut out = Vec::new();
        for (tag, m) in [("real", &minority), ("synthetic", &self.batch.rows)] {
            let p = pca_project(&model, m)?;
            out.push((
                tag.to_string(),
                p.iter_rows()
                    .map(|r| (r[0], r.get(1).copied().unwrap_or(0.0)))
                    .collect(),
            ));
        }
        Ok(out)
    }

    /// Joint embedding of real and synthetic rows (each capped at half the
    /// t-SNE row budget).
    pub fn tsne_series(&self, cfg: &TsneConfig) -> Result<Vec<Series>> {
        let minority = self.minority();
        let half = (cfg.max_rows / 2).max(1);
        let take = |m: &Matrix| -> Matrix {
            let idx: Vec<usize> = (0..m.rows()).take(half).collect();
            m.select_rows(&idx)
        };
        let (a, b) = (take(&minority), take(&self.batch.rows));
        let joint = a.vstack(&b)?;
        // Standardise so no column dominates the distances.
        let mut z = joint.clone();
        for j in 0..z.cols() {
            let col = joint.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd =
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            let sd = if sd > 1e-12 { sd } else { 1.0 };
            for i in 0..z.rows() {
                z.set(i, j, (joint.get(i, j) - mean) / sd);
            }
        }
        let perplexity = cfg.perplexity.min((z.rows() as f64 / 3.0) - 1.0).max(1.0);
        let emb = tsne(
            &z,
            &TsneConfig {
                perplexity,
                ..cfg.clone()
            },
        )?;
        let mut real = Vec::new();
        let mut synth = Vec::new();
        for (k, &row) in emb.rows.iter().enumerate() {
            let pt = (emb.coords.get(k, 0), emb.coords.get(k, 1));
            if row < a.rows() {
                real.push(pt);
            } else {
                synth.push(pt);
            }
        }
        Ok(vec![("real".into(), real), ("synthetic".into(), synth)])
    }

    /// Writes every curve CSV (and SVG when asked) under `prefix`.
    pub fn write(
        &self,
        bundle: &mut Bundle,
        prefix: &str,
        tsne_cfg: Option<&TsneConfig>,
        with_svg: bool,
    ) -> Result<()> {
        let mut sets = vec![
            ("ecdf", self.ecdf_series()?, svg::Style::Lines),
            ("kde", self.kde_series()?, svg::Style::Lines),
            ("pca", self.pca_series()?, svg::Style::Points),
        ];
        if let Some(cfg) = tsne_cfg {
            if self.minority().rows() + self.batch.len() >= 8 {
                sets.push(("tsne", self.tsne_series(cfg)?, svg::Style::Points));
            }
        }
        for (kind, series, style) in sets {
            bundle.text(&format!("{prefix}{kind}.csv"), &series_csv(&series))?;
            if with_svg {
                bundle.text(
                    &format!("{prefix}{kind}.svg"),
                    &svg::render(kind, &series, style),
                )?;
            }
        }
        Ok(())
    }
}

/// One row per (iteration, model, class, trial): the recall distribution
/// behind the box plots.
pub fn boxplot_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,technique,model,class,trial,recall,precision,f1\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for rec in records {
        let tech = rec.technique.map_or("real", |t| t.name());
        for e in &rec.evaluations {
            for (t, m) in e.trials.iter().enumerate() {
                for (class, c) in [(0, &m.class0), (1, &m.class1)] {
                    let _ = writeln!(
                        s,
                        "{},{tech},{},{class},{t},{},{},{}",
                        rec.iteration,
                        e.model.name(),
                        opt(c.recall),
                        opt(c.precision),
                        opt(c.f1)
                    );
                }
            }
        }
    }
    s
}

pub fn importance_csv(imp: &[GlobalImportance]) -> String {
    let mut s = String::from("class,rank,feature,importance\n");
    for g in imp {
        for (rank, j) in g.ranking().into_iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                g.class,
                rank + 1,
                g.names[j],
                g.importance[j]
            );
        }
    }
    s
}

/// Values of three features with the label, one row per instance.
pub fn scatter3d_csv(ds: &TabularDataset, features: [usize; 3]) -> String {
    let names = ds.feature_names();
    let mut s = format!(
        "{},{},{},label\n",
        names[features[0]], names[features[1]], names[features[2]]
    );
    for i in 0..ds.row_count() {
        let r = ds.row(i);
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r[features[0]],
            r[features[1]],
            r[features[2]],
            ds.labels()[i]
        );
    }
    s
}

pub fn loss_csv(log: &[EpochLoss]) -> String {
    let mut s = String::from("epoch,generator,discriminator\n");
    for l in log {
        let _ = writeln!(s, "{},{},{}", l.epoch, l.generator, l.discriminator);
    }
    s
}
