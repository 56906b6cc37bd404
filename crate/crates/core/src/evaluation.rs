//! Fixed-window and rolling-origin evaluation of one method on one series.
//!
//! Normalization statistics come from the training segment only, every
//! window refits the method on (at most `lookback`) points before its
//! origin, and forecasts are inverse-normalized before scoring, so metric
//! values are on the original scale. Windows are weighted equally.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::DataError;
use crate::forecasters::{self, FittedModel, ForecastError, MethodSpec};
use crate::metrics::{compute_metric, Metric, MetricError};
use crate::normalize::{NormalizationKind, NormalizerState};
use crate::series::TimeSeries;
use crate::split::{split, SplitRanges, SplitSpec};
use crate::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Fixed,
    Rolling,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Fixed => "fixed",
            Strategy::Rolling => "rolling",
        }
    }
}

fn default_horizon() -> usize {
    24
}
fn default_lookback() -> usize {
    512
}
fn default_metrics() -> Vec<Metric> {
    vec![Metric::Mae, Metric::Mse, Metric::Rmse, Metric::Smape, Metric::Mase]
}
fn default_mase_period() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_lookback")]
    pub lookback: usize,
    /// Defaults to `horizon`.
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default)]
    pub include_partial_final_window: bool,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub normalization: NormalizationKind,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub seed: u64,
    /// Seasonal lag of the MASE scale.
    #[serde(default = "default_mase_period")]
    pub mase_period: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Fixed,
            horizon: default_horizon(),
            lookback: default_lookback(),
            stride: None,
            include_partial_final_window: false,
            split: SplitSpec::default(),
            normalization: NormalizationKind::Zscore,
            metrics: default_metrics(),
            seed: 0,
            mase_period: 1,
        }
    }
}

impl EvalConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.horizon)
    }

    /// Copy with every defaulted field made explicit.
    pub fn canonical(&self) -> Self {
        Self { stride: Some(self.stride()), ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidConfig(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.lookback == 0 {
            return bad("lookback must be at least 1");
        }
        if self.stride() == 0 {
            return bad("stride must be at least 1");
        }
        if self.metrics.is_empty() {
            return bad("metrics must not be empty");
        }
        if self.mase_period == 0 {
            return bad("mase_period must be at least 1");
        }
        self.split.validate().map_err(EvalError::Data)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowFailure {
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("no evaluation window fits: n = {n}, first origin = {start}, horizon = {horizon}")]
    NoWindows { n: usize, start: usize, horizon: usize },
    #[error("window {index} (origin {origin}): {source}")]
    Window {
        index: usize,
        origin: usize,
        #[source]
        source: WindowFailure,
    },
}

/// Forecast origins; each window scores `[o, o + horizon)` clipped to `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub origins: Vec<usize>,
    pub horizon: usize,
    pub n: usize,
}

impl WindowPlan {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Number of points scored by the window at `origin`.
    pub fn span(&self, origin: usize) -> usize {
        self.horizon.min(self.n - origin)
    }
}

/// Enumerates origins from `test_start`.
///
/// Fixed: the single origin `test_start`. Rolling: `test_start`,
/// `test_start + stride`, … while a full horizon fits; with
/// `include_partial_final_window` the next origin is appended when it still
/// lies before `n`.
pub fn plan_windows(n: usize, test_start: usize, config: &EvalConfig) -> Result<WindowPlan, EvalError> {
    let horizon = config.horizon;
    let stride = config.stride();
    if horizon == 0 || stride == 0 {
        return Err(EvalError::InvalidConfig("horizon and stride must be at least 1".into()));
    }
    if test_start + horizon > n {
        return Err(EvalError::NoWindows { n, start: test_start, horizon });
    }
    let origins = match config.strategy {
        Strategy::Fixed => vec![test_start],
        Strategy::Rolling => {
            let mut origins = Vec::new();
            let mut o = test_start;
            while o + horizon <= n {
                origins.push(o);
                o += stride;
            }
            if config.include_partial_final_window && o < n {
                origins.push(o);
            }
            origins
        }
    };
    Ok(WindowPlan { origins, horizon, n })
}

/// Outcome of one evaluation, as logged and persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset_id: String,
    pub method_id: String,
    pub strategy: Strategy,
    pub horizon: usize,
    pub lookback: usize,
    pub stride: usize,
    pub metric_values: BTreeMap<String, f64>,
    pub n_windows: usize,
    pub runtime_ms: u64,
    pub config_digest: String,
}

impl EvalRecord {
    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record serializes");
        s.push('\n');
        s
    }
}

/// Inverse-normalized forecast of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowForecast<T> {
    pub origin: usize,
    pub values: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome<T> {
    pub record: EvalRecord,
    pub windows: Vec<WindowForecast<T>>,
}

/// Which part of the series is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Test,
    /// The validation segment, with the test segment hidden.
    Validation,
}

/// Split, normalizer and normalized values shared by every window of a series.
#[derive(Debug, Clone)]
pub struct PreparedSeries<T> {
    pub ranges: SplitRanges,
    pub normalizer: NormalizerState<T>,
    pub normalized: Array2<T>,
}

/// Splits `series` and fits the normalizer on the training segment. A
/// constant training channel falls back to no normalization.
pub fn prepare<T: Scalar>(series: &TimeSeries<T>, config: &EvalConfig) -> Result<PreparedSeries<T>, EvalError> {
    let ranges = split(series.len(), &config.split)?;
    let values = series.values();
    let train = values.slice(s![ranges.train.clone(), ..]);
    let normalizer = match NormalizerState::fit(train, config.normalization) {
        Ok(st) => st,
        Err(DataError::ZeroVariance { .. }) => NormalizerState::identity(series.n_channels()),
        Err(e) => return Err(e.into()),
    };
    let normalized = normalizer.apply(values)?;
    Ok(PreparedSeries { ranges, normalizer, normalized })
}

impl<T: Scalar> PreparedSeries<T> {
    /// First scored index and the end of the visible data for `segment`.
    pub fn bounds(&self, segment: Segment) -> (usize, usize) {
        match segment {
            Segment::Test => (self.ranges.test.start, self.ranges.test.end),
            Segment::Validation => (self.ranges.val.start, self.ranges.val.end),
        }
    }

    pub fn history_start(&self, origin: usize, lookback: usize) -> usize {
        origin.saturating_sub(lookback)
    }

    /// Fits `spec` on the normalized history before `origin`.
    pub fn fit_at(&self, spec: &MethodSpec, origin: usize, lookback: usize) -> Result<FittedModel<T>, ForecastError> {
        let start = self.history_start(origin, lookback);
        forecasters::fit(spec, self.normalized.slice(s![start..origin, ..]))
    }

    /// Original-scale forecast of `span` points from a fitted model.
    pub fn forecast(&self, model: &FittedModel<T>, horizon: usize, span: usize) -> Result<Array2<T>, ForecastError> {
        let f = forecasters::predict(model, horizon)?;
        // Forecast width is validated against the history, so it always
        // matches the normalizer.
        let back = self.normalizer.invert(f.values.view()).expect("forecast width matches series");
        Ok(back.slice(s![..span, ..]).to_owned())
    }
}

/// Model fitted for the window at `origin`. It only ever sees points before
/// `origin` (plus training-segment normalization statistics).
pub fn fit_at_origin<T: Scalar>(
    series: &TimeSeries<T>,
    spec: &MethodSpec,
    config: &EvalConfig,
    origin: usize,
) -> Result<FittedModel<T>, EvalError> {
    config.validate()?;
    let prepared = prepare(series, config)?;
    prepared.fit_at(spec, origin, config.lookback).map_err(|e| EvalError::Window { index: 0, origin, source: e.into() })
}

pub fn score_window<T: Scalar>(
    metrics: &[Metric],
    actual: ArrayView2<'_, T>,
    forecast: ArrayView2<'_, T>,
    context: ArrayView2<'_, T>,
    mase_period: usize,
) -> Result<Vec<f64>, MetricError> {
    metrics.iter().map(|&m| compute_metric(m, actual, forecast, context, mase_period).map(|v| v.as_f64())).collect()
}

/// Evaluates `spec` on the test segment of `series`.
pub fn evaluate<T: Scalar>(
    series: &TimeSeries<T>,
    spec: &MethodSpec,
    config: &EvalConfig,
) -> Result<EvalRecord, EvalError> {
    evaluate_detailed(series, spec, config, Segment::Test, &mut |_, _| {}).map(|o| o.record)
}

/// Evaluation with per-window forecasts and a progress callback
/// `(completed_windows, planned_windows)`.
pub fn evaluate_detailed<T: Scalar>(
    series: &TimeSeries<T>,
    spec: &MethodSpec,
    config: &EvalConfig,
    segment: Segment,
    progress: &mut dyn FnMut(usize, usize),
) -> Result<EvalOutcome<T>, EvalError> {
    config.validate()?;
    spec.validate().map_err(|e| EvalError::Window { index: 0, origin: 0, source: e.into() })?;
    let started = Instant::now();
    let prepared = prepare(series, config)?;
    let (start, end) = prepared.bounds(segment);
    let plan = plan_windows(end, start, config)?;
    let values = series.values();

    let mut sums = vec![0.0; config.metrics.len()];
    let mut windows = Vec::with_capacity(plan.len());
    for (index, &origin) in plan.origins.iter().enumerate() {
        let fail = |source: WindowFailure| EvalError::Window { index, origin, source };
        let span = plan.span(origin);
        let model = prepared.fit_at(spec, origin, config.lookback).map_err(|e| fail(e.into()))?;
        let forecast = prepared.forecast(&model, config.horizon, span).map_err(|e| fail(e.into()))?;
        let actual = values.slice(s![origin..origin + span, ..]);
        let context = values.slice(s![prepared.history_start(origin, config.lookback)..origin, ..]);
        let scores = score_window(&config.metrics, actual, forecast.view(), context, config.mase_period)
            .map_err(|e| fail(e.into()))?;
        for (acc, v) in sums.iter_mut().zip(scores) {
            *acc += v;
        }
        windows.push(WindowForecast { origin, values: forecast });
        progress(index + 1, plan.len());
    }

    let count = plan.len() as f64;
    let metric_values =
        config.metrics.iter().zip(&sums).map(|(m, total)| (m.name().to_string(), total / count)).collect();
    let record = EvalRecord {
        dataset_id: series.id().to_string(),
        method_id: spec.method_id.clone(),
        strategy: config.strategy,
        horizon: config.horizon,
        lookback: config.lookback,
        stride: config.stride(),
        metric_values,
        n_windows: plan.len(),
        runtime_ms: started.elapsed().as_millis() as u64,
        config_digest: config.digest(),
    };
    Ok(EvalOutcome { record, windows })
}
