//! The time-series data model shared by every other module.

use chrono::{DateTime, Utc};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::Scalar;

/// Time axis of a series: either plain integer indices or UTC instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Timestamps {
    Index(Vec<i64>),
    Instant(Vec<DateTime<Utc>>),
}

impl Timestamps {
    pub fn len(&self) -> usize {
        match self {
            Timestamps::Index(v) => v.len(),
            Timestamps::Instant(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of the first element that does not strictly exceed its predecessor.
    pub fn first_non_increasing(&self) -> Option<usize> {
        fn check<K: PartialOrd>(v: &[K]) -> Option<usize> {
            v.windows(2).position(|w| w[1] <= w[0]).map(|i| i + 1)
        }
        match self {
            Timestamps::Index(v) => check(v),
            Timestamps::Instant(v) => check(v),
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Timestamps {
        match self {
            Timestamps::Index(v) => Timestamps::Index(v[range].to_vec()),
            Timestamps::Instant(v) => Timestamps::Instant(v[range].to_vec()),
        }
    }

    /// Canonical text form of the `i`-th stamp, as written to CSV.
    pub fn format(&self, i: usize) -> String {
        match self {
            Timestamps::Index(v) => v[i].to_string(),
            Timestamps::Instant(v) => v[i].format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        }
    }
}

/// A timestamped `n × c` matrix of observations.
///
/// Construction validates the invariants (at least one point and one
/// channel, strictly increasing stamps, finite values), so every
/// `TimeSeries` in circulation is well formed.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    id: String,
    timestamps: Timestamps,
    values: Array2<T>,
    frequency: Option<String>,
    channel_names: Vec<String>,
    domain: Option<String>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(
        id: impl Into<String>,
        timestamps: Timestamps,
        values: Array2<T>,
        channel_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let (n, c) = values.dim();
        if n == 0 {
            return Err(DataError::EmptySeries);
        }
        if c == 0 {
            return Err(DataError::ShapeMismatch("series needs at least one channel".into()));
        }
        if timestamps.len() != n {
            return Err(DataError::ShapeMismatch(format!("{} timestamps for {} rows", timestamps.len(), n)));
        }
        if channel_names.len() != c {
            return Err(DataError::ShapeMismatch(format!("{} channel names for {} channels", channel_names.len(), c)));
        }
        if let Some(line) = timestamps.first_non_increasing() {
            return Err(DataError::NonMonotonicTimestamps { line });
        }
        if let Some(((row, channel), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::NonFinite { row, channel });
        }
        Ok(Self { id: id.into(), timestamps, values, frequency: None, channel_names, domain: None })
    }

    /// Series indexed `0..n` with channels named `v0, v1, …` (or `v` when univariate).
    pub fn from_values(id: impl Into<String>, values: Array2<T>) -> Result<Self, DataError> {
        let (n, c) = values.dim();
        let names = default_channel_names(c);
        Self::new(id, Timestamps::Index((0..n as i64).collect()), values, names)
    }

    pub fn univariate(id: impl Into<String>, values: &[T]) -> Result<Self, DataError> {
        let arr = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| DataError::ShapeMismatch(e.to_string()))?;
        Self::from_values(id, arr)
    }

    pub fn with_frequency(mut self, frequency: impl Into<String>) -> Self {
        self.frequency = Some(frequency.into());
        self
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn timestamps(&self) -> &Timestamps {
        &self.timestamps
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn frequency(&self) -> Option<&str> {
        self.frequency.as_deref()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn domain(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.values.ncols()
    }

    /// Copy of one channel.
    pub fn channel(&self, j: usize) -> Vec<T> {
        self.values.column(j).to_vec()
    }

    /// Per-row mean across channels, in `f64`.
    pub fn channel_mean(&self) -> Vec<f64> {
        self.values.mean_axis(Axis(1)).expect("at least one channel").iter().map(|v| v.as_f64()).collect()
    }

    /// The first `len` points as a new series (metadata kept).
    pub fn prefix(&self, len: usize) -> Result<Self, DataError> {
        let len = len.min(self.len());
        if len == 0 {
            return Err(DataError::EmptySeries);
        }
        Ok(Self {
            id: self.id.clone(),
            timestamps: self.timestamps.slice(0..len),
            values: self.values.slice(ndarray::s![..len, ..]).to_owned(),
            frequency: self.frequency.clone(),
            channel_names: self.channel_names.clone(),
            domain: self.domain.clone(),
        })
    }

    /// Replaces the values, keeping the time axis and metadata.
    pub fn map_values(&self, values: Array2<T>) -> Result<Self, DataError> {
        let mut out = Self::new(self.id.clone(), self.timestamps.clone(), values, self.channel_names.clone())?;
        out.frequency = self.frequency.clone();
        out.domain = self.domain.clone();
        Ok(out)
    }

    /// Converts the element type.
    pub fn cast<U: Scalar>(&self) -> TimeSeries<U> {
        TimeSeries {
            id: self.id.clone(),
            timestamps: self.timestamps.clone(),
            values: self.values.mapv(|v| U::lit(v.as_f64())),
            frequency: self.frequency.clone(),
            channel_names: self.channel_names.clone(),
            domain: self.domain.clone(),
        }
    }
}

pub(crate) fn default_channel_names(c: usize) -> Vec<String> {
    if c == 1 {
        vec!["v".to_string()]
    } else {
        (0..c).map(|j| format!("v{j}")).collect()
    }
}

/// Nested row-major copy of a matrix, the shape used by every JSON payload.
pub fn to_rows<T: Scalar>(m: ArrayView2<'_, T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Inverse of [`to_rows`]; every row must have the same width.
pub fn from_rows<T: Scalar>(rows: &[Vec<T>]) -> Result<Array2<T>, DataError> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(DataError::ShapeMismatch("ragged rows".into()));
    }
    let flat: Vec<T> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((n, c), flat).map_err(|e| DataError::ShapeMismatch(e.to_string()))
}
