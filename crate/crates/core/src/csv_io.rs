//! Dataset CSV ingestion and canonical serialization.
//!
//! Format: a header row whose first column holds the time axis (ISO-8601
//! instants or integers) and whose remaining columns are channels. Decimal
//! point is `.`; there are no thousands separators.

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::series::{TimeSeries, Timestamps};
use crate::Scalar;

/// What to do with empty cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputePolicy {
    #[default]
    Reject,
    /// Interior gaps are linearly interpolated per channel; leading and
    /// trailing gaps are still rejected.
    Linear,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    #[serde(default)]
    pub impute: ImputePolicy,
}

const MISSING_TOKENS: [&str; 5] = ["", "na", "nan", "null", "none"];

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    MISSING_TOKENS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

fn parse_instant(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)).map(|n| n.and_utc())
}

fn parse_stamps(raw: &[String]) -> Result<Timestamps, DataError> {
    let ints: Option<Vec<i64>> = raw.iter().map(|s| s.trim().parse::<i64>().ok()).collect();
    if let Some(ints) = ints {
        return Ok(Timestamps::Index(ints));
    }
    let mut instants = Vec::with_capacity(raw.len());
    for (i, s) in raw.iter().enumerate() {
        match parse_instant(s) {
            Some(dt) => instants.push(dt),
            None => {
                return Err(DataError::MalformedCsv {
                    line: i + 2,
                    message: format!("'{s}' is neither an integer index nor an ISO-8601 instant"),
                })
            }
        }
    }
    Ok(Timestamps::Instant(instants))
}

/// Parses dataset CSV bytes into a validated series.
pub fn parse_dataset_csv<T: Scalar>(raw: &[u8], id: &str, options: &CsvOptions) -> Result<TimeSeries<T>, DataError> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| DataError::MalformedCsv { line: 0, message: format!("not valid UTF-8: {e}") })?;
    let mut reader =
        csv::ReaderBuilder::new().has_headers(true).flexible(false).trim(csv::Trim::All).from_reader(text.as_bytes());

    let headers = reader.headers().map_err(|e| DataError::MalformedCsv { line: 1, message: e.to_string() })?.clone();
    if headers.len() < 2 || headers.iter().any(|h| h.is_empty()) {
        return Err(DataError::MalformedCsv {
            line: 1,
            message: "header needs a time column and at least one named channel".into(),
        });
    }
    let channel_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let c = channel_names.len();

    let mut stamps_raw = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| DataError::MalformedCsv { line, message: e.to_string() })?;
        if rec.len() != c + 1 {
            return Err(DataError::MalformedCsv {
                line,
                message: format!("expected {} fields, found {}", c + 1, rec.len()),
            });
        }
        stamps_raw.push(rec[0].to_string());
        let mut row = Vec::with_capacity(c);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            if is_missing(cell) {
                row.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| DataError::MalformedCsv {
                line,
                message: format!("column '{}': '{}' is not a number", channel_names[j], cell),
            })?;
            if !v.is_finite() {
                return Err(DataError::MalformedCsv {
                    line,
                    message: format!("column '{}': non-finite value", channel_names[j]),
                });
            }
            row.push(Some(v));
        }
        cells.push(row);
    }
    if cells.is_empty() {
        return Err(DataError::EmptySeries);
    }

    let timestamps = parse_stamps(&stamps_raw)?;
    if let Some(pos) = timestamps.first_non_increasing() {
        return Err(DataError::NonMonotonicTimestamps { line: pos + 2 });
    }

    let n = cells.len();
    let mut values = Array2::<T>::zeros((n, c));
    for j in 0..c {
        let column: Vec<Option<f64>> = cells.iter().map(|r| r[j]).collect();
        let filled = fill_column(&column, options.impute)
            .map_err(|row| DataError::MissingValues { line: row + 2, column: channel_names[j].clone() })?;
        for (i, v) in filled.into_iter().enumerate() {
            values[[i, j]] = T::lit(v);
        }
    }

    TimeSeries::new(id, timestamps, values, channel_names)
}

/// Returns the completed column, or the row index of the first gap that cannot be filled.
fn fill_column(column: &[Option<f64>], policy: ImputePolicy) -> Result<Vec<f64>, usize> {
    if let Some(first_gap) = column.iter().position(Option::is_none) {
        if policy == ImputePolicy::Reject {
            return Err(first_gap);
        }
    } else {
        return Ok(column.iter().map(|v| v.unwrap()).collect());
    }
    let known: Vec<usize> = (0..column.len()).filter(|&i| column[i].is_some()).collect();
    let (Some(&lo), Some(&hi)) = (known.first(), known.last()) else {
        return Err(0);
    };
    if lo > 0 {
        return Err(0);
    }
    if hi < column.len() - 1 {
        return Err(hi + 1);
    }
    let mut out = vec![0.0; column.len()];
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (column[a].unwrap(), column[b].unwrap());
        for (i, slot) in out.iter_mut().enumerate().take(b + 1).skip(a) {
            let frac = (i - a) as f64 / (b - a) as f64;
            *slot = va + (vb - va) * frac;
        }
    }
    out[hi] = column[hi].unwrap();
    Ok(out)
}

/// Writes the canonical CSV form: `t` header, RFC 3339 UTC instants or
/// integers, shortest round-trip decimal values.
pub fn write_dataset_csv<T: Scalar>(series: &TimeSeries<T>) -> String {
    let mut out = String::new();
    out.push('t');
    for name in series.channel_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let values = series.values();
    for i in 0..series.len() {
        out.push_str(&series.timestamps().format(i));
        for j in 0..series.n_channels() {
            out.push(',');
            out.push_str(&values[[i, j]].to_string());
        }
        out.push('\n');
    }
    out
}
