//! Declarative chart specs, validation against a data summary, and
//! server-side aggregation into renderable series.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{parse_number, DataSummary, DatasetHandle, Dtype};

/// Scatter charts keep at most this many points.
pub const SCATTER_POINT_CAP: usize = 2_000;
const SCATTER_SEED: u64 = 0x5eed_c4a7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Bar,
    Line,
    Scatter,
    Histogram,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    None,
    Count,
    Mean,
    Median,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub x_field: String,
    #[serde(default)]
    pub y_field: Option<String>,
    pub aggregate: Aggregate,
    #[serde(default)]
    pub group_field: Option<String>,
}

impl fmt::Display for ChartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({}", self.chart_type, self.x_field)?;
        if let Some(y) = &self.y_field {
            write!(f, ", {y}")?;
        }
        write!(f, ") {:?}", self.aggregate)?;
        if let Some(g) = &self.group_field {
            write!(f, " by {g}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("unknown column {0:?}")]
    UnknownField(String),
    #[error("{chart:?} charts need {what}")]
    Unsupported { chart: ChartType, what: &'static str },
    #[error("column {field:?} must be numeric for this chart")]
    NotNumeric { field: String },
}

fn require_numeric(summary: &DataSummary, field: &str) -> Result<(), SpecError> {
    match summary.column(field) {
        Some(c) if c.dtype == Dtype::Numeric => Ok(()),
        Some(_) => Err(SpecError::NotNumeric { field: field.to_owned() }),
        None => Err(SpecError::UnknownField(field.to_owned())),
    }
}

impl ChartSpec {
    /// Checks field existence and per-chart type constraints.
    pub fn validate(&self, summary: &DataSummary) -> Result<(), SpecError> {
        let fields = [Some(&self.x_field), self.y_field.as_ref(), self.group_field.as_ref()];
        for field in fields.into_iter().flatten() {
            if summary.column(field).is_none() {
                return Err(SpecError::UnknownField(field.clone()));
            }
        }
        let unsupported = |what| Err(SpecError::Unsupported { chart: self.chart_type, what });
        let needs_y_numeric = |spec: &Self| match &spec.y_field {
            Some(y) => require_numeric(summary, y),
            None => Err(SpecError::Unsupported { chart: spec.chart_type, what: "a y_field" }),
        };
        match self.chart_type {
            ChartType::Bar | ChartType::Line => {
                if self.chart_type == ChartType::Bar && self.aggregate == Aggregate::None {
                    return unsupported("an aggregate other than none");
                }
                match self.aggregate {
                    Aggregate::Count => Ok(()),
                    _ => needs_y_numeric(self),
                }
            }
            ChartType::Scatter => {
                if self.aggregate != Aggregate::None {
                    return unsupported("aggregate none");
                }
                // A categorical x gives a strip plot.
                needs_y_numeric(self)
            }
            ChartType::Histogram => {
                if self.y_field.is_some() || self.group_field.is_some() {
                    return unsupported("only an x_field");
                }
                if !matches!(self.aggregate, Aggregate::None | Aggregate::Count) {
                    return unsupported("aggregate none or count");
                }
                require_numeric(summary, &self.x_field)
            }
            ChartType::Box => {
                if self.group_field.is_some() {
                    return unsupported("no group_field");
                }
                if self.aggregate != Aggregate::None {
                    return unsupported("aggregate none");
                }
                needs_y_numeric(self)
            }
        }
    }
}

/// An axis value: numbers stay numbers, everything else is a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChartValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(ChartValue, ChartValue)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPayload {
    pub spec: ChartSpec,
    pub series: Vec<Series>,
    pub row_basis: usize,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("chart spec does not match the dataset: {0}")]
pub struct SpecDatasetMismatch(pub String);

/// Group key ordered numerically for numeric columns, lexically otherwise.
#[derive(Debug, Clone, PartialEq)]
enum Key {
    Num(f64),
    Text(String),
}

impl Eq for Key {}

/// Per-x values and row counts within one group.
type Buckets = BTreeMap<Key, (Vec<f64>, usize)>;

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Key::Num(a), Key::Num(b)) => a.total_cmp(b),
            (Key::Text(a), Key::Text(b)) => a.cmp(b),
            (Key::Num(_), Key::Text(_)) => Ordering::Less,
            (Key::Text(_), Key::Num(_)) => Ordering::Greater,
        }
    }
}

impl Key {
    fn value(&self) -> ChartValue {
        match self {
            Key::Num(v) => ChartValue::Number(*v),
            Key::Text(s) => ChartValue::Text(s.clone()),
        }
    }

    fn label(&self) -> String {
        match self {
            Key::Num(v) => format!("{v}"),
            Key::Text(s) => s.clone(),
        }
    }
}

/// Column accessor that yields typed cells for one field.
struct Field<'a> {
    cells: &'a [Option<String>],
    numeric: bool,
}

impl<'a> Field<'a> {
    fn open(data: &'a DatasetHandle, name: &str) -> Result<Self, SpecDatasetMismatch> {
        let cells = data
            .column(name)
            .ok_or_else(|| SpecDatasetMismatch(format!("no column {name:?}")))?;
        let numeric = data.summary().column(name).is_some_and(|c| c.dtype == Dtype::Numeric);
        Ok(Self { cells, numeric })
    }

    fn key(&self, row: usize) -> Option<Key> {
        let raw = self.cells[row].as_deref()?;
        if self.numeric {
            parse_number(raw).map(Key::Num)
        } else {
            Some(Key::Text(raw.to_owned()))
        }
    }

    fn number(&self, row: usize) -> Option<f64> {
        parse_number(self.cells[row].as_deref()?)
    }
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Sturges' rule: `ceil(log2 n) + 1` bins.
pub fn sturges_bins(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (n as f64).log2().ceil() as usize + 1
    }
}

fn reduce(aggregate: Aggregate, values: &[f64], count: usize) -> f64 {
    match aggregate {
        Aggregate::Count => count as f64,
        Aggregate::Sum => values.iter().sum(),
        Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            median(&sorted)
        }
        Aggregate::None => unreachable!("grouped charts always aggregate"),
    }
}

/// Computes the data series for a validated spec over all rows whose
/// relevant fields are non-null (and numeric where the chart needs it).
pub fn compute_payload(
    spec: &ChartSpec,
    data: &DatasetHandle,
    caption: &str,
) -> Result<ChartPayload, SpecDatasetMismatch> {
    spec.validate(data.summary()).map_err(|e| SpecDatasetMismatch(e.to_string()))?;
    let x = Field::open(data, &spec.x_field)?;
    let y = spec.y_field.as_deref().map(|f| Field::open(data, f)).transpose()?;
    let group = spec.group_field.as_deref().map(|f| Field::open(data, f)).transpose()?;

    let needs_y_number = !(matches!(spec.chart_type, ChartType::Bar | ChartType::Line)
        && spec.aggregate == Aggregate::Count);
    // (group key, x key, y number) per usable row.
    let mut rows: Vec<(Option<Key>, Key, Option<f64>)> = Vec::new();
    for r in 0..data.row_count() {
        let Some(xk) = x.key(r) else { continue };
        let yv = match &y {
            Some(yf) if needs_y_number => match yf.number(r) {
                Some(v) => Some(v),
                None => continue,
            },
            Some(yf) => {
                if yf.cells[r].is_none() {
                    continue;
                }
                None
            }
            None => None,
        };
        let gk = match &group {
            Some(g) => match g.key(r) {
                Some(k) => Some(k),
                None => continue,
            },
            None => None,
        };
        rows.push((gk, xk, yv));
    }
    let row_basis = rows.len();
    let default_label = spec.y_field.clone().unwrap_or_else(|| "count".into());

    let series = match spec.chart_type {
        ChartType::Bar | ChartType::Line if spec.aggregate != Aggregate::None => {
            let mut groups: BTreeMap<Option<Key>, Buckets> = BTreeMap::new();
            for (g, xk, yv) in rows {
                let slot = groups.entry(g).or_default().entry(xk).or_default();
                slot.0.extend(yv);
                slot.1 += 1;
            }
            groups
                .into_iter()
                .map(|(g, by_x)| Series {
                    label: g.map_or_else(|| default_label.clone(), |k| k.label()),
                    points: by_x
                        .into_iter()
                        .map(|(xk, (vals, n))| (xk.value(), ChartValue::Number(reduce(spec.aggregate, &vals, n))))
                        .collect(),
                })
                .collect()
        }
        ChartType::Bar | ChartType::Line | ChartType::Scatter => {
            let mut kept: Vec<usize> = (0..rows.len()).collect();
            if spec.chart_type == ChartType::Scatter && rows.len() > SCATTER_POINT_CAP {
                let mut rng = ChaCha8Rng::seed_from_u64(SCATTER_SEED);
                kept = sample(&mut rng, rows.len(), SCATTER_POINT_CAP).into_vec();
                kept.sort_unstable();
            }
            let mut groups: BTreeMap<Option<Key>, Vec<(ChartValue, ChartValue)>> = BTreeMap::new();
            for i in kept {
                let (g, xk, yv) = &rows[i];
                let yv = yv.expect("validated numeric y");
                groups.entry(g.clone()).or_default().push((xk.value(), ChartValue::Number(yv)));
            }
            if spec.chart_type == ChartType::Line {
                // Stable sort keeps row order among equal x.
                for points in groups.values_mut() {
                    points.sort_by(|a, b| match (&a.0, &b.0) {
                        (ChartValue::Number(p), ChartValue::Number(q)) => p.total_cmp(q),
                        (ChartValue::Text(p), ChartValue::Text(q)) => p.cmp(q),
                        _ => Ordering::Equal,
                    });
                }
            }
            groups
                .into_iter()
                .map(|(g, points)| Series { label: g.map_or_else(|| default_label.clone(), |k| k.label()), points })
                .collect()
        }
        ChartType::Histogram => {
            let values: Vec<f64> = rows
                .iter()
                .map(|(_, xk, _)| match xk {
                    Key::Num(v) => *v,
                    Key::Text(_) => unreachable!("validated numeric x"),
                })
                .collect();
            histogram_series(&spec.x_field, &values)
        }
        ChartType::Box => {
            let mut by_x: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
            for (_, xk, yv) in rows {
                by_x.entry(xk).or_default().push(yv.expect("validated numeric y"));
            }
            for vals in by_x.values_mut() {
                vals.sort_by(f64::total_cmp);
            }
            [("min", 0.0), ("q1", 0.25), ("median", 0.5), ("q3", 0.75), ("max", 1.0)]
                .into_iter()
                .map(|(label, q)| Series {
                    label: label.into(),
                    points: by_x
                        .iter()
                        .map(|(xk, vals)| (xk.value(), ChartValue::Number(quantile(vals, q))))
                        .collect(),
                })
                .filter(|s| !s.points.is_empty())
                .collect()
        }
    };
    Ok(ChartPayload { spec: spec.clone(), series, row_basis, caption: caption.to_owned() })
}

/// Equal-width bins over `[min, max]`; the last bin is closed. Points are
/// (bin lower edge, count).
fn histogram_series(label: &str, values: &[f64]) -> Vec<Series> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = if min == max { 1 } else { sturges_bins(values.len()) };
    let width = (max - min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let idx = if width == 0.0 { 0 } else { (((v - min) / width) as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    vec![Series {
        label: label.to_owned(),
        points: counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (ChartValue::Number(min + i as f64 * width), ChartValue::Number(c as f64)))
            .collect(),
    }]
}
