//! Loading of UCI-style CSV files.
//!
//! A dataset is described by a JSON sidecar that names every column and its
//! kind. Numeric columns are min-max scaled to `[0, 1]` using the bounds seen
//! in the file, categorical columns are one-hot encoded, and the label column
//! is split off into an [`Oracle`] so the clustering code never sees it.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    /// Identifier columns (e.g. an animal name) that carry no feature.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// The schema sidecar as written on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub has_header: bool,
}

impl SchemaFile {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: SchemaFile = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one label column, found {labels}"
            )));
        }
        if !self
            .columns
            .iter()
            .any(|c| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
        {
            return Err(Error::Schema("no feature columns".into()));
        }
        Ok(())
    }
}

/// Per-column encoding learned from a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnEncoding {
    Numeric { name: String, min: f64, max: f64 },
    Categorical { name: String, values: Vec<String> },
    Label { name: String },
    Ignore { name: String },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Numeric { name, .. }
            | ColumnEncoding::Categorical { name, .. }
            | ColumnEncoding::Label { name }
            | ColumnEncoding::Ignore { name } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnEncoding::Numeric { .. } => 1,
            ColumnEncoding::Categorical { values, .. } => values.len(),
            ColumnEncoding::Label { .. } | ColumnEncoding::Ignore { .. } => 0,
        }
    }
}

/// Column layout plus the normalisation bounds and category sets discovered
/// while loading. Enough to encode new raw rows the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnEncoding>,
    pub has_header: bool,
}

impl DatasetSchema {
    /// Number of encoded feature dimensions.
    pub fn dim(&self) -> usize {
        self.columns.iter().map(ColumnEncoding::width).sum()
    }

    /// Number of columns that contribute features (numeric + categorical).
    pub fn feature_columns(&self) -> usize {
        self.columns.iter().filter(|c| c.width() > 0).count()
    }

    pub fn label_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| matches!(c, ColumnEncoding::Label { .. }))
            .expect("schema validated with one label column")
    }

    /// Encode a raw row covering every column (the label value is ignored).
    pub fn encode_row<S: AsRef<str>>(&self, raw: &[S]) -> Result<Vec<f64>> {
        if raw.len() != self.columns.len() {
            return Err(Error::ColumnCount {
                row: 0,
                expected: self.columns.len(),
                found: raw.len(),
            });
        }
        self.encode_fields(self.columns.iter().zip(raw.iter().map(AsRef::as_ref)), 0)
    }

    /// Encode a row that lists only the feature columns, in schema order.
    pub fn encode_features<S: AsRef<str>>(&self, raw: &[S]) -> Result<Vec<f64>> {
        let feature_cols: Vec<&ColumnEncoding> =
            self.columns.iter().filter(|c| c.width() > 0).collect();
        if raw.len() != feature_cols.len() {
            return Err(Error::ColumnCount {
                row: 0,
                expected: feature_cols.len(),
                found: raw.len(),
            });
        }
        self.encode_fields(
            feature_cols.into_iter().zip(raw.iter().map(AsRef::as_ref)),
            0,
        )
    }

    /// Encode a row given either as every column or as feature columns only.
    pub fn encode_raw<S: AsRef<str>>(&self, raw: &[S]) -> Result<Vec<f64>> {
        if raw.len() == self.columns.len() {
            self.encode_row(raw)
        } else {
            self.encode_features(raw)
        }
    }

    fn encode_fields<'a>(
        &self,
        fields: impl Iterator<Item = (&'a ColumnEncoding, &'a str)>,
        row: usize,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        for (col, value) in fields {
            match col {
                ColumnEncoding::Numeric { name, min, max } => {
                    let v = parse_number(value, name, row)?;
                    let span = max - min;
                    out.push(if span > 0.0 { (v - min) / span } else { 0.0 });
                }
                ColumnEncoding::Categorical { name, values } => {
                    let hit = values.iter().position(|v| v == value).ok_or_else(|| {
                        Error::UnknownCategory {
                            column: name.clone(),
                            value: value.to_string(),
                        }
                    })?;
                    out.extend((0..values.len()).map(|i| if i == hit { 1.0 } else { 0.0 }));
                }
                ColumnEncoding::Label { .. } | ColumnEncoding::Ignore { .. } => {}
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`DatasetSchema::encode_row`].
pub fn encode_row<S: AsRef<str>>(raw: &[S], schema: &DatasetSchema) -> Result<Vec<f64>> {
    schema.encode_row(raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub id: usize,
    pub features: Vec<f64>,
}

impl AsRef<[f64]> for DataRow {
    fn as_ref(&self) -> &[f64] {
        &self.features
    }
}

/// Ground truth, kept apart from the feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    labels: Vec<usize>,
    category_names: Vec<String>,
}

impl Oracle {
    pub fn new(labels: Vec<usize>, category_names: Vec<String>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= category_names.len()) {
            return Err(Error::Schema(format!(
                "label id {bad} has no category name"
            )));
        }
        Ok(Oracle {
            labels,
            category_names,
        })
    }

    pub fn label(&self, row: usize) -> Result<usize> {
        self.labels
            .get(row)
            .copied()
            .ok_or(Error::MissingLabel(row))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn category_count(&self) -> usize {
        self.category_names.len()
    }

    pub fn category_name(&self, category: usize) -> Option<&str> {
        self.category_names.get(category).map(String::as_str)
    }

    pub fn category_names(&self) -> &[String] {
        &self.category_names
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub rows: Vec<DataRow>,
    pub oracle: Oracle,
    pub schema: DatasetSchema,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }
}

/// Load `path` using the column declarations in `schema_path`.
pub fn load_dataset(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset> {
    let schema = SchemaFile::from_path(schema_path)?;
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut text = String::new();
    file.read_to_string(&mut text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let records =
        read_records(text.as_bytes(), schema.has_header).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    build_dataset(&schema, records)
}

/// Parse CSV text that is already in memory.
pub fn parse_dataset(csv_text: &str, schema: &SchemaFile) -> Result<Dataset> {
    schema.validate()?;
    let records =
        read_records(csv_text.as_bytes(), schema.has_header).map_err(|source| Error::Csv {
            path: "<memory>".into(),
            source,
        })?;
    build_dataset(schema, records)
}

fn read_records(bytes: &[u8], has_header: bool) -> csv::Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        out.push(record.iter().map(str::to_string).collect());
    }
    Ok(out)
}

fn build_dataset(schema: &SchemaFile, records: Vec<Vec<String>>) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if records.len() < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: records.len(),
        });
    }
    let ncols = schema.columns.len();
    for (row, rec) in records.iter().enumerate() {
        if rec.len() != ncols {
            return Err(Error::ColumnCount {
                row,
                expected: ncols,
                found: rec.len(),
            });
        }
    }

    let mut columns = Vec::with_capacity(ncols);
    let mut label_values: Vec<String> = Vec::new();
    let mut label_col = 0;
    for (j, spec) in schema.columns.iter().enumerate() {
        let enc = match spec.kind {
            ColumnKind::Numeric => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for (row, rec) in records.iter().enumerate() {
                    let v = parse_number(&rec[j], &spec.name, row)?;
                    min = min.min(v);
                    max = max.max(v);
                }
                if min == max {
                    log::warn!(
                        "column `{}` is constant ({min}); it encodes to 0 everywhere",
                        spec.name
                    );
                }
                ColumnEncoding::Numeric {
                    name: spec.name.clone(),
                    min,
                    max,
                }
            }
            ColumnKind::Categorical => {
                let values: BTreeSet<&str> = records.iter().map(|r| r[j].as_str()).collect();
                ColumnEncoding::Categorical {
                    name: spec.name.clone(),
                    values: values.into_iter().map(str::to_string).collect(),
                }
            }
            ColumnKind::Label => {
                label_col = j;
                label_values = sorted_labels(records.iter().map(|r| r[j].as_str()));
                ColumnEncoding::Label {
                    name: spec.name.clone(),
                }
            }
            ColumnKind::Ignore => ColumnEncoding::Ignore {
                name: spec.name.clone(),
            },
        };
        columns.push(enc);
    }

    let learned = DatasetSchema {
        columns,
        has_header: schema.has_header,
    };
    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (id, rec) in records.iter().enumerate() {
        let features = learned.encode_fields(
            learned.columns.iter().zip(rec.iter().map(String::as_str)),
            id,
        )?;
        rows.push(DataRow { id, features });
        let label = &rec[label_col];
        labels.push(
            label_values
                .iter()
                .position(|v| v == label)
                .expect("label collected above"),
        );
    }
    let oracle = Oracle::new(labels, label_values)?;
    Ok(Dataset {
        rows,
        oracle,
        schema: learned,
    })
}

/// Distinct label strings, in numeric order when every label is a number and
/// lexicographic order otherwise.
fn sorted_labels<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = values.collect();
    let mut out: Vec<&str> = distinct.into_iter().collect();
    if out.iter().all(|v| v.parse::<f64>().is_ok()) {
        out.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.partial_cmp(&y)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.cmp(b))
        });
    }
    out.into_iter().map(str::to_string).collect()
}

fn parse_number(value: &str, column: &str, row: usize) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NotNumeric {
            row,
            column: column.to_string(),
            value: value.to_string(),
        })
}
