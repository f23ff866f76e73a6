//! Tabular dataset ingestion and column profiling.
//!
//! A comma-delimited UTF-8 file with a header row is parsed into a read-only
//! [`DatasetHandle`] and a [`DataSummary`] that grounds generation prompts and
//! chart validation. Empty cells (after trimming) are nulls.
//!
//! Column types are inferred from all non-null values, in this order:
//! numeric (every value parses as a finite number), boolean (every value is
//! one of true/false/0/1, case-insensitive), datetime (every value is an
//! ISO-8601 date or date-time), categorical (at most
//! `max(CATEGORICAL_MIN_CARDINALITY, CATEGORICAL_ROW_FRACTION * rows)`
//! distinct values), otherwise text. A column with no non-null values is text.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

pub const CATEGORICAL_MIN_CARDINALITY: usize = 20;
pub const CATEGORICAL_ROW_FRACTION: f64 = 0.05;
pub const MAX_SAMPLE_VALUES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    Numeric,
    Categorical,
    Boolean,
    Datetime,
    Text,
}

impl Dtype {
    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::Numeric => "numeric",
            Dtype::Categorical => "categorical",
            Dtype::Boolean => "boolean",
            Dtype::Datetime => "datetime",
            Dtype::Text => "text",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub dtype: Dtype,
    pub unique_count: usize,
    pub null_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    pub sample_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub name: String,
    pub row_count: usize,
    pub columns: Vec<ColumnProfile>,
}

impl DataSummary {
    pub fn column(&self, name: &str) -> Option<&ColumnProfile> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("file has no data rows")]
    EmptyFile,
    #[error("row {line} has {found} fields, expected {expected}")]
    RaggedRows { line: u64, expected: usize, found: usize },
    #[error("duplicate column name {0:?}")]
    DuplicateHeader(String),
    #[error("malformed input: {0}")]
    Malformed(String),
}

struct Table {
    headers: Vec<String>,
    /// Column-major; `None` is a null cell.
    columns: Vec<Vec<Option<String>>>,
    rows: usize,
}

/// Read-only, cheaply cloneable access to ingested rows.
#[derive(Clone)]
pub struct DatasetHandle {
    inner: Arc<Table>,
    summary: Arc<DataSummary>,
}

impl std::fmt::Debug for DatasetHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DatasetHandle")
            .field("name", &self.summary.name)
            .field("rows", &self.inner.rows)
            .finish()
    }
}

impl DatasetHandle {
    pub fn row_count(&self) -> usize {
        self.inner.rows
    }

    pub fn headers(&self) -> &[String] {
        &self.inner.headers
    }

    pub fn summary(&self) -> &DataSummary {
        &self.summary
    }

    /// Cells of one column in row order; `None` for nulls.
    pub fn column(&self, name: &str) -> Option<&[Option<String>]> {
        let idx = self.inner.headers.iter().position(|h| h == name)?;
        Some(&self.inner.columns[idx])
    }

    /// Frequency of each non-null value of a column.
    pub fn value_counts(&self, name: &str) -> Option<BTreeMap<String, usize>> {
        let mut counts = BTreeMap::new();
        for value in self.column(name)?.iter().flatten() {
            *counts.entry(value.clone()).or_insert(0) += 1;
        }
        Some(counts)
    }
}

pub fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn is_bool(s: &str) -> bool {
    matches!(s.to_ascii_lowercase().as_str(), "true" | "false" | "0" | "1")
}

fn is_iso_datetime(s: &str) -> bool {
    DateTime::parse_from_rfc3339(s).is_ok()
        || NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()
        || NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").is_ok()
        || NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").is_ok()
}

fn profile(name: &str, cells: &[Option<String>], rows: usize) -> ColumnProfile {
    let values: Vec<&str> = cells.iter().flatten().map(String::as_str).collect();
    let null_count = rows - values.len();
    let mut seen = HashSet::new();
    let mut sample_values = Vec::new();
    for v in &values {
        if seen.insert(*v) && sample_values.len() < MAX_SAMPLE_VALUES {
            sample_values.push((*v).to_owned());
        }
    }
    let unique_count = seen.len();

    let numbers: Option<Vec<f64>> = values.iter().map(|v| parse_number(v)).collect();
    let categorical_cutoff =
        CATEGORICAL_MIN_CARDINALITY.max((CATEGORICAL_ROW_FRACTION * rows as f64).floor() as usize);
    let (dtype, min, max) = match numbers {
        _ if values.is_empty() => (Dtype::Text, None, None),
        Some(nums) => {
            let min = nums.iter().copied().fold(f64::INFINITY, f64::min);
            let max = nums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (Dtype::Numeric, Some(min), Some(max))
        }
        None if values.iter().all(|v| is_bool(v)) => (Dtype::Boolean, None, None),
        None if values.iter().all(|v| is_iso_datetime(v)) => (Dtype::Datetime, None, None),
        None if unique_count <= categorical_cutoff => (Dtype::Categorical, None, None),
        None => (Dtype::Text, None, None),
    };
    ColumnProfile {
        name: name.to_owned(),
        dtype,
        unique_count,
        null_count,
        min,
        max,
        sample_values,
    }
}

/// Parses comma-delimited bytes and profiles every column.
pub fn ingest(bytes: &[u8], name: &str) -> Result<(DataSummary, DatasetHandle), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();
    let headers: Vec<String> = match records.next() {
        None => return Err(IngestError::EmptyFile),
        Some(rec) => rec
            .map_err(|e| IngestError::Malformed(e.to_string()))?
            .iter()
            .map(|h| h.trim().trim_start_matches('\u{feff}').to_owned())
            .collect(),
    };
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(IngestError::DuplicateHeader(h.clone()));
        }
    }

    let mut columns: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    let mut rows = 0usize;
    for rec in records {
        let rec = rec.map_err(|e| IngestError::Malformed(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(IngestError::RaggedRows {
                line: rec.position().map_or(0, |p| p.line()),
                expected: headers.len(),
                found: rec.len(),
            });
        }
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            let trimmed = field.trim();
            col.push((!trimmed.is_empty()).then(|| trimmed.to_owned()));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(IngestError::EmptyFile);
    }

    let summary = DataSummary {
        name: name.to_owned(),
        row_count: rows,
        columns: headers.iter().zip(&columns).map(|(h, c)| profile(h, c, rows)).collect(),
    };
    let handle = DatasetHandle {
        inner: Arc::new(Table { headers, columns, rows }),
        summary: Arc::new(summary.clone()),
    };
    Ok((summary, handle))
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Deterministic text rendering substituted into the generation prompt.
pub fn summary_text(summary: &DataSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", summary.name);
    let _ = writeln!(out, "rows: {}", summary.row_count);
    let _ = write!(out, "columns:");
    for c in &summary.columns {
        let _ = write!(
            out,
            "\n- {} ({}): unique={}, nulls={}",
            c.name,
            c.dtype.as_str(),
            c.unique_count,
            c.null_count
        );
        match (c.min, c.max) {
            (Some(min), Some(max)) => {
                let _ = write!(out, ", min={}, max={}", fmt_num(min), fmt_num(max));
            }
            _ => {
                let quoted: Vec<String> =
                    c.sample_values.iter().map(|s| format!("{s:?}")).collect();
                let _ = write!(out, ", samples=[{}]", quoted.join(", "));
            }
        }
    }
    out
}
