//! Historical datasets (block mining times, propagation delays) and their
//! reliability checks.
//!
//! File format: CSV with an optional `timestamp,value` header. Timestamps are
//! ISO dates (`YYYY-MM-DD`), integer epoch seconds, or opaque labels; values
//! are non-negative decimals, or empty for a missing measurement.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    Minutes,
    Milliseconds,
}

impl TimeUnit {
    pub fn to_seconds(self, x: f64) -> f64 {
        match self {
            TimeUnit::Seconds => x,
            TimeUnit::Minutes => x * 60.0,
            TimeUnit::Milliseconds => x / 1000.0,
        }
    }
}

impl FromStr for TimeUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s" | "sec" | "seconds" => Ok(TimeUnit::Seconds),
            "min" | "minutes" => Ok(TimeUnit::Minutes),
            "ms" | "milliseconds" => Ok(TimeUnit::Milliseconds),
            other => Err(format!("unknown time unit `{other}`")),
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeUnit::Seconds => "seconds",
            TimeUnit::Minutes => "minutes",
            TimeUnit::Milliseconds => "milliseconds",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Timestamp {
    /// Seconds since the Unix epoch (dates map to midnight UTC).
    Epoch(i64),
    Label(String),
}

impl Timestamp {
    fn parse(raw: &str) -> Timestamp {
        if let Ok(secs) = raw.parse::<i64>() {
            return Timestamp::Epoch(secs);
        }
        if let Ok(date) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
            let secs = date.and_hms_opt(0, 0, 0).map(|dt| dt.and_utc().timestamp());
            if let Some(secs) = secs {
                return Timestamp::Epoch(secs);
            }
        }
        Timestamp::Label(raw.to_string())
    }

    pub fn epoch(&self) -> Option<i64> {
        match self {
            Timestamp::Epoch(s) => Some(*s),
            Timestamp::Label(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub timestamp: Timestamp,
    /// Seconds after normalization; `None` for a null measurement.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    unit: TimeUnit,
    source_path: String,
    rows: Vec<Row>,
    values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("negative value at row {row}")]
    NegativeValue { row: usize },
    #[error("dataset has no rows")]
    EmptyFile,
}

/// Strict loading rejects null values; tolerant loading counts them for the
/// reliability report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Tolerant,
}

impl Dataset {
    /// Builds a dataset from raw values already expressed in seconds.
    /// Timestamps are synthetic consecutive epoch seconds.
    pub fn from_values(name: &str, values: Vec<f64>) -> Result<Dataset, DatasetError> {
        if values.is_empty() {
            return Err(DatasetError::EmptyFile);
        }
        let mut rows = Vec::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(DatasetError::Parse {
                    row: i + 1,
                    reason: "non-finite value".into(),
                });
            }
            if *v < 0.0 {
                return Err(DatasetError::NegativeValue { row: i + 1 });
            }
            rows.push(Row {
                timestamp: Timestamp::Epoch(i as i64),
                value: Some(*v),
            });
        }
        Ok(Dataset {
            name: name.to_string(),
            unit: TimeUnit::Seconds,
            source_path: String::new(),
            rows,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Non-null values in file order, in seconds.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn null_count(&self) -> usize {
        self.rows.iter().filter(|r| r.value.is_none()).count()
    }

    /// Fraction of values strictly greater than `t`.
    pub fn survival(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|v| **v > t).count() as f64 / self.values.len() as f64
    }
}

pub fn load_dataset(path: impl AsRef<Path>, unit: TimeUnit) -> Result<Dataset, DatasetError> {
    load_dataset_with(path, unit, ParseMode::Strict)
}

pub fn load_dataset_with(
    path: impl AsRef<Path>,
    unit: TimeUnit,
    mode: ParseMode,
) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut ds = parse_dataset(&text, unit, mode)?;
    ds.name = name;
    ds.source_path = path.display().to_string();
    Ok(ds)
}

/// Parses dataset text. Row numbers in errors count data rows from 1,
/// excluding the header.
pub fn parse_dataset(text: &str, unit: TimeUnit, mode: ParseMode) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut last_epoch: Option<i64> = None;
    let mut first = true;
    for record in reader.records() {
        let row = rows.len() + 1;
        let record = record.map_err(|e| DatasetError::Parse {
            row,
            reason: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if std::mem::take(&mut first)
            && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("timestamp"))
        {
            continue;
        }
        if record.len() != 2 {
            return Err(DatasetError::Parse {
                row,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let timestamp = Timestamp::parse(&record[0]);
        if let Some(epoch) = timestamp.epoch() {
            if last_epoch.is_some_and(|prev| epoch < prev) {
                return Err(DatasetError::Parse {
                    row,
                    reason: "timestamps must be non-decreasing".into(),
                });
            }
            last_epoch = Some(epoch);
        }
        let raw = &record[1];
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("null") {
            if mode == ParseMode::Strict {
                return Err(DatasetError::Parse {
                    row,
                    reason: "missing value".into(),
                });
            }
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| DatasetError::Parse {
                row,
                reason: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::Parse {
                    row,
                    reason: "non-finite value".into(),
                });
            }
            if v < 0.0 {
                return Err(DatasetError::NegativeValue { row });
            }
            let secs = unit.to_seconds(v);
            values.push(secs);
            Some(secs)
        };
        rows.push(Row { timestamp, value });
    }
    if rows.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    Ok(Dataset {
        name: String::new(),
        unit,
        source_path: String::new(),
        rows,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPolicy {
    /// Largest tolerated distance between consecutive timestamps, seconds.
    pub max_gap_seconds: f64,
    pub min_rows: usize,
}

impl Default for ReliabilityPolicy {
    fn default() -> Self {
        Self {
            max_gap_seconds: 7.0 * 86_400.0,
            min_rows: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub reliable: bool,
    pub null_count: usize,
    pub max_gap_seconds: f64,
    pub row_count: usize,
    pub messages: Vec<String>,
}

pub fn validate_dataset(dataset: &Dataset, policy: &ReliabilityPolicy) -> ValidationReport {
    let mut messages = Vec::new();
    let null_count = dataset.null_count();
    let row_count = dataset.rows().len();

    let epochs: Vec<i64> = dataset.rows().iter().filter_map(|r| r.timestamp.epoch()).collect();
    let labelled = row_count - epochs.len();
    if labelled > 0 {
        messages.push(format!(
            "{labelled} row(s) have non-date timestamps and are excluded from gap analysis"
        ));
    }
    let max_gap = epochs
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .fold(0.0, f64::max);

    if null_count > 0 {
        messages.push(format!("{null_count} null value(s)"));
    }
    if max_gap > policy.max_gap_seconds {
        messages.push(format!(
            "gap of {max_gap} s exceeds the allowed {} s",
            policy.max_gap_seconds
        ));
    }
    if row_count < policy.min_rows {
        messages.push(format!(
            "{row_count} row(s), at least {} required",
            policy.min_rows
        ));
    }
    ValidationReport {
        reliable: null_count == 0 && max_gap <= policy.max_gap_seconds && row_count >= policy.min_rows,
        null_count,
        max_gap_seconds: max_gap,
        row_count,
        messages,
    }
}
