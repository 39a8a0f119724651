//! Cohort CSV ingestion and emission.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use fairshift_core::preprocess::{binarize_race, RaceAliases};
use fairshift_core::{Dataset, Matrix};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

/// Race alias table shipped with the tool.
pub const DEFAULT_RACE_ALIASES: &str = include_str!("../assets/race_aliases.json");

pub fn default_race_aliases() -> RaceAliases {
    serde_json::from_str(DEFAULT_RACE_ALIASES).expect("bundled alias table is valid JSON")
}

pub fn load_race_aliases(path: &Path) -> anyhow::Result<RaceAliases> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading alias table {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing alias table {}", path.display()))
}

/// Role of each CSV column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub label: String,
    pub group: String,
    /// Features coded 0/1; they are exempt from percentile filtering.
    #[serde(default)]
    pub binary: Vec<String>,
    pub features: Vec<String>,
}

impl CsvSchema {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading schema {}", path.display()))?;
        let schema: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing schema {}", path.display()))?;
        schema.validate()?;
        Ok(schema)
    }

    /// Schema of a cleaned cohort file: every column other than `label` and
    /// `group` is a feature, in header order.
    pub fn canonical(header: &[String]) -> Self {
        Self {
            label: "label".into(),
            group: "group".into(),
            binary: Vec::new(),
            features: header
                .iter()
                .filter(|h| *h != "label" && *h != "group")
                .cloned()
                .collect(),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.features.is_empty() {
            bail!("schema lists no feature columns");
        }
        if self.features.iter().any(|f| *f == self.label || *f == self.group) || self.label == self.group {
            bail!("label, group and feature columns must be distinct");
        }
        if let Some(b) = self.binary.iter().find(|b| !self.features.contains(b)) {
            bail!("binary column '{b}' is not listed among the features");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DropCounts {
    /// Rows with an empty cell in a mapped column.
    pub missing: usize,
    /// Rows whose group value is in the "unknown" alias set.
    pub race_rejected: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub dropped: DropCounts,
    pub label_column: String,
    pub group_column: String,
    /// Indices (into the feature list) of the schema's binary columns.
    pub binary: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub aliases: RaceAliases,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            aliases: default_race_aliases(),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn reader(path: &Path, delimiter: u8) -> anyhow::Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Header of a CSV file, skipping `#` comment lines.
pub fn read_header(path: &Path, delimiter: u8) -> anyhow::Result<Vec<String>> {
    let mut rdr = reader(path, delimiter)?;
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

/// Loads a cohort. The group column may hold 0/1 indicators or raw race
/// strings; the latter are binarized with `opts.aliases`, and rows in the
/// unknown set are dropped.
pub fn load_csv(path: &Path, schema: Option<&CsvSchema>, opts: &CsvOptions) -> anyhow::Result<LoadedCsv> {
    let mut rdr = reader(path, opts.delimiter)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let schema = match schema {
        Some(s) => s.clone(),
        None => CsvSchema::canonical(&header),
    };
    schema.validate()?;
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let col = |name: &str| {
        position
            .get(name)
            .copied()
            .with_context(|| format!("column '{name}' named in the schema is not in {}", path.display()))
    };
    let label_col = col(&schema.label)?;
    let group_col = col(&schema.group)?;
    let feature_cols = schema.features.iter().map(|f| col(f)).collect::<anyhow::Result<Vec<_>>>()?;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut group = Vec::new();
    let mut dropped = DropCounts::default();
    for (line, record) in rdr.records().enumerate() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        let row_no = record.position().map_or(line + 2, |p| p.line() as usize);
        let mapped = std::iter::once(label_col).chain(std::iter::once(group_col)).chain(feature_cols.iter().copied());
        if mapped.clone().any(|c| record.get(c).map_or(true, is_missing)) {
            dropped.missing += 1;
            continue;
        }
        let raw_group = &record[group_col];
        let z = match raw_group {
            "0" => 0,
            "1" => 1,
            other => match binarize_race(other, &opts.aliases).indicator() {
                Some(z) => z,
                None => {
                    dropped.race_rejected += 1;
                    continue;
                }
            },
        };
        let y = match record[label_col].parse::<f64>() {
            Ok(v) if v == 0.0 => 0,
            Ok(v) if v == 1.0 => 1,
            _ => bail!(
                "row {row_no}: label '{}' in column '{}' is outside {{0, 1}}",
                &record[label_col],
                schema.label
            ),
        };
        for (&c, name) in feature_cols.iter().zip(&schema.features) {
            let v: f64 = record[c]
                .parse()
                .with_context(|| format!("row {row_no}: non-numeric value '{}' in column '{name}'", &record[c]))?;
            if !v.is_finite() {
                bail!("row {row_no}: non-finite value in column '{name}'");
            }
            data.push(v);
        }
        labels.push(y);
        group.push(z);
    }
    if labels.is_empty() {
        bail!("{} has no usable rows after dropping incomplete ones", path.display());
    }
    let n = labels.len();
    let dataset = Dataset::new(
        Matrix::new(n, feature_cols.len(), data)?,
        labels,
        group,
        schema.features.clone(),
    )?;
    let binary = schema
        .binary
        .iter()
        .filter_map(|b| schema.features.iter().position(|f| f == b))
        .collect();
    Ok(LoadedCsv {
        dataset,
        dropped,
        label_column: schema.label,
        group_column: schema.group,
        binary,
    })
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Opens `path` for writing and emits the manifest as a `#` comment line,
/// which the cohort reader skips.
pub fn csv_writer(path: &Path, manifest: &RunManifest) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# manifest {}", serde_json::to_string(manifest)?)?;
    Ok(csv::Writer::from_writer(out))
}

/// Writes the canonical cohort CSV: features in order, then `label` and
/// `group` as 0/1.
pub fn write_dataset_csv(path: &Path, d: &Dataset, manifest: &RunManifest) -> anyhow::Result<()> {
    let mut w = csv_writer(path, manifest)?;
    let mut header: Vec<&str> = d.feature_names().iter().map(String::as_str).collect();
    header.extend(["label", "group"]);
    w.write_record(&header)?;
    for i in 0..d.n_rows() {
        let mut rec: Vec<String> = d.features().row(i).iter().map(|&v| fmt_f64(v)).collect();
        rec.push(d.labels()[i].to_string());
        rec.push(d.group()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn ensure_dir(path: &Path) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(path.to_path_buf())
}
