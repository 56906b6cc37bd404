//! The method layer: ten built-in forecasters behind one fit/predict
//! contract, plus external methods reached through the plugin protocol.
//!
//! Built-ins fit every channel independently. Model state is plain data and
//! round-trips through JSON.

mod naive;
pub mod plugin;
mod regression;
mod smoothing;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{from_rows, to_rows};
use crate::Scalar;

pub use plugin::{run_external_method, PluginRequest, PluginResponse, DEFAULT_PLUGIN_TIMEOUT};

/// Identifiers of the built-in methods, in registry order.
pub const BUILTIN_METHODS: [&str; 10] =
    ["naive", "mean", "drift", "seasonal_naive", "ses", "holt", "holt_winters", "theta", "ar_ls", "linear_trend"];

pub const EXTERNAL_PREFIX: &str = "external:";

/// Method family as recorded in the results store.
pub fn method_family(method_id: &str) -> &'static str {
    if method_id.starts_with(EXTERNAL_PREFIX) {
        "external"
    } else if method_id == "ensemble" {
        "ensemble"
    } else {
        "statistical"
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error("invalid parameter for {method}: {message}")]
    InvalidParam { method: String, message: String },
    #[error("{method} needs at least {needed} points, got {got}")]
    InsufficientHistory { method: String, needed: usize, got: usize },
    #[error("normal equations are rank deficient")]
    SingularFit,
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("forecast contains non-finite values")]
    NonFinite,
    #[error("plugin crashed (exit code {code:?}): {stderr}")]
    PluginCrash { code: Option<i32>, stderr: String },
    #[error("plugin did not answer within {0:?}")]
    PluginTimeout(Duration),
    #[error("plugin protocol error: {0}")]
    PluginProtocolError(String),
    #[error("model serialization: {0}")]
    Serialization(String),
}

/// A method id, its named scalar parameters and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method_id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl MethodSpec {
    pub fn new(method_id: impl Into<String>) -> Self {
        Self { method_id: method_id.into(), params: BTreeMap::new(), seed: 0 }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Every built-in with default parameters.
    pub fn all_builtin() -> Vec<MethodSpec> {
        BUILTIN_METHODS.iter().map(|m| MethodSpec::new(*m)).collect()
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        Method::from_spec(self).map(|_| ())
    }
}

/// A spec resolved into typed parameters.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Method {
    Naive,
    Mean,
    Drift,
    SeasonalNaive { period: Option<usize> },
    Ses { alpha: f64 },
    Holt { alpha: f64, beta: f64 },
    HoltWinters { alpha: f64, beta: f64, gamma: f64, period: Option<usize> },
    Theta { alpha: f64 },
    ArLs { order: Option<usize> },
    LinearTrend,
    External { path: PathBuf, timeout: Duration },
}

struct Params<'a> {
    spec: &'a MethodSpec,
    allowed: &'static [&'static str],
}

impl Params<'_> {
    fn invalid(&self, message: String) -> ForecastError {
        ForecastError::InvalidParam { method: self.spec.method_id.clone(), message }
    }

    fn check_names(&self) -> Result<(), ForecastError> {
        for name in self.spec.params.keys() {
            if !self.allowed.contains(&name.as_str()) {
                return Err(self.invalid(format!("unknown parameter '{name}'")));
            }
        }
        Ok(())
    }

    fn unit(&self, name: &str, default: f64) -> Result<f64, ForecastError> {
        let v = self.spec.params.get(name).copied().unwrap_or(default);
        if !(v > 0.0 && v <= 1.0) {
            return Err(self.invalid(format!("{name} = {v} must lie in (0, 1]")));
        }
        Ok(v)
    }

    fn count(&self, name: &str, min: usize) -> Result<Option<usize>, ForecastError> {
        match self.spec.params.get(name) {
            None => Ok(None),
            Some(&v) if v.fract() == 0.0 && v >= min as f64 && v <= 1e6 => Ok(Some(v as usize)),
            Some(&v) => Err(self.invalid(format!("{name} = {v} must be an integer ≥ {min}"))),
        }
    }
}

impl Method {
    pub(crate) fn from_spec(spec: &MethodSpec) -> Result<Method, ForecastError> {
        let id = spec.method_id.as_str();
        if let Some(path) = id.strip_prefix(EXTERNAL_PREFIX) {
            if path.is_empty() {
                return Err(ForecastError::UnknownMethod(id.to_string()));
            }
            let timeout = match spec.params.get("timeout_ms") {
                Some(&ms) if ms > 0.0 && ms.is_finite() => Duration::from_millis(ms as u64),
                Some(&ms) => {
                    return Err(ForecastError::InvalidParam {
                        method: id.to_string(),
                        message: format!("timeout_ms = {ms} must be positive"),
                    })
                }
                None => DEFAULT_PLUGIN_TIMEOUT,
            };
            return Ok(Method::External { path: PathBuf::from(path), timeout });
        }
        let allowed: &'static [&'static str] = match id {
            "naive" | "mean" | "drift" | "linear_trend" => &[],
            "seasonal_naive" => &["period"],
            "ses" | "theta" => &["alpha"],
            "holt" => &["alpha", "beta"],
            "holt_winters" => &["alpha", "beta", "gamma", "period"],
            "ar_ls" => &["order"],
            _ => return Err(ForecastError::UnknownMethod(id.to_string())),
        };
        let p = Params { spec, allowed };
        p.check_names()?;
        Ok(match id {
            "naive" => Method::Naive,
            "mean" => Method::Mean,
            "drift" => Method::Drift,
            "linear_trend" => Method::LinearTrend,
            "seasonal_naive" => Method::SeasonalNaive { period: p.count("period", 1)? },
            "ses" => Method::Ses { alpha: p.unit("alpha", 0.3)? },
            "theta" => Method::Theta { alpha: p.unit("alpha", 0.3)? },
            "holt" => Method::Holt { alpha: p.unit("alpha", 0.3)?, beta: p.unit("beta", 0.1)? },
            "holt_winters" => Method::HoltWinters {
                alpha: p.unit("alpha", 0.3)?,
                beta: p.unit("beta", 0.1)?,
                gamma: p.unit("gamma", 0.1)?,
                period: p.count("period", 1)?,
            },
            "ar_ls" => Method::ArLs { order: p.count("order", 1)? },
            _ => unreachable!(),
        })
    }
}

/// Learned per-channel state of a built-in method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum ChannelState<T> {
    /// Flat forecast: naive, mean and ses.
    Level {
        level: T,
    },
    Drift {
        last: T,
        slope: T,
    },
    /// The last `period` observations, oldest first.
    Seasonal {
        tail: Vec<T>,
    },
    Holt {
        level: T,
        trend: T,
    },
    /// `seasonals[i]` is the seasonal term of step `i + 1` (cyclic).
    HoltWinters {
        level: T,
        trend: T,
        seasonals: Vec<T>,
    },
    /// Line evaluated at `t = origin + h`.
    Linear {
        intercept: T,
        slope: T,
        origin: T,
    },
    Theta {
        level: T,
        intercept: T,
        slope: T,
        origin: T,
    },
    Autoregressive {
        intercept: T,
        coefficients: Vec<T>,
        tail: Vec<T>,
        ridge: bool,
    },
}

impl<T: Scalar> ChannelState<T> {
    fn forecast(&self, horizon: usize) -> Vec<T> {
        let h = |i: usize| T::from_usize_lossy(i + 1);
        match self {
            ChannelState::Level { level } => vec![*level; horizon],
            ChannelState::Drift { last, slope } => (0..horizon).map(|i| *last + h(i) * *slope).collect(),
            ChannelState::Seasonal { tail } => (0..horizon).map(|i| tail[i % tail.len()]).collect(),
            ChannelState::Holt { level, trend } => (0..horizon).map(|i| *level + h(i) * *trend).collect(),
            ChannelState::HoltWinters { level, trend, seasonals } => {
                (0..horizon).map(|i| *level + h(i) * *trend + seasonals[i % seasonals.len()]).collect()
            }
            ChannelState::Linear { intercept, slope, origin } => {
                (0..horizon).map(|i| *intercept + *slope * (*origin + h(i))).collect()
            }
            ChannelState::Theta { level, intercept, slope, origin } => {
                let half = T::lit(0.5);
                (0..horizon).map(|i| half * (*intercept + *slope * (*origin + h(i)) + *level)).collect()
            }
            ChannelState::Autoregressive { intercept, coefficients, tail, .. } => {
                regression::ar_forecast(*intercept, coefficients, tail, horizon)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum ModelState<T> {
    Channels(Vec<ChannelState<T>>),
    /// External methods are fitted lazily by the plugin at predict time.
    External {
        history: Vec<Vec<T>>,
    },
}

/// A fitted method, ready to forecast from the end of its training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedModel<T> {
    pub method_id: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub train_length: usize,
    pub state: ModelState<T>,
}

impl<T: Scalar> FittedModel<T> {
    pub fn to_json(&self) -> Result<String, ForecastError> {
        serde_json::to_string(self).map_err(|e| ForecastError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ForecastError> {
        serde_json::from_str(text).map_err(|e| ForecastError::Serialization(e.to_string()))
    }

    /// True when any channel of an `ar_ls` model fell back to ridge regression.
    pub fn used_ridge_fallback(&self) -> bool {
        match &self.state {
            ModelState::Channels(chs) => {
                chs.iter().any(|c| matches!(c, ChannelState::Autoregressive { ridge: true, .. }))
            }
            ModelState::External { .. } => false,
        }
    }

    fn spec(&self) -> MethodSpec {
        MethodSpec { method_id: self.method_id.clone(), params: self.params.clone(), seed: self.seed }
    }
}

/// `h × c` forecast starting at `origin_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast<T> {
    pub values: Array2<T>,
    pub origin_index: usize,
    pub horizon: usize,
}

impl<T: Scalar> Forecast<T> {
    pub fn rows(&self) -> Vec<Vec<T>> {
        to_rows(self.values.view())
    }
}

fn insufficient(method: &str, needed: usize, got: usize) -> ForecastError {
    ForecastError::InsufficientHistory { method: method.to_string(), needed, got }
}

fn resolve_period(explicit: Option<usize>, x: &[f64]) -> usize {
    explicit.unwrap_or_else(|| crate::features::detect_period(x).unwrap_or(0).max(1))
}

/// Fits `spec` on an `n × c` history.
pub fn fit<T: Scalar>(spec: &MethodSpec, history: ArrayView2<'_, T>) -> Result<FittedModel<T>, ForecastError> {
    let method = Method::from_spec(spec)?;
    let (n, c) = history.dim();
    if n == 0 || c == 0 {
        return Err(insufficient(&spec.method_id, 1, n));
    }
    if history.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite);
    }
    let state = if let Method::External { .. } = method {
        ModelState::External { history: to_rows(history) }
    } else {
        let mut channels = Vec::with_capacity(c);
        for j in 0..c {
            let x = history.column(j).to_vec();
            channels.push(fit_channel(&method, &spec.method_id, &x)?);
        }
        ModelState::Channels(channels)
    };
    Ok(FittedModel {
        method_id: spec.method_id.clone(),
        params: spec.params.clone(),
        seed: spec.seed,
        train_length: n,
        state,
    })
}

fn fit_channel<T: Scalar>(method: &Method, id: &str, x: &[T]) -> Result<ChannelState<T>, ForecastError> {
    let n = x.len();
    let as_f64 = || x.iter().map(|v| v.as_f64()).collect::<Vec<f64>>();
    match *method {
        Method::Naive => Ok(naive::naive(x)),
        Method::Mean => Ok(naive::mean(x)),
        Method::Drift => {
            if n < 2 {
                return Err(insufficient(id, 2, n));
            }
            Ok(naive::drift(x))
        }
        Method::SeasonalNaive { period } => {
            let m = resolve_period(period, &as_f64());
            if n < m {
                return Err(insufficient(id, m, n));
            }
            Ok(naive::seasonal_naive(x, m))
        }
        Method::Ses { alpha } => Ok(smoothing::ses(x, T::lit(alpha))),
        Method::Holt { alpha, beta } => {
            if n < 2 {
                return Err(insufficient(id, 2, n));
            }
            Ok(smoothing::holt(x, T::lit(alpha), T::lit(beta)))
        }
        Method::HoltWinters { alpha, beta, gamma, period } => {
            let m = resolve_period(period, &as_f64());
            if m < 2 {
                // Without a season the recursions reduce to Holt's.
                if n < 2 {
                    return Err(insufficient(id, 2, n));
                }
                return Ok(smoothing::holt(x, T::lit(alpha), T::lit(beta)));
            }
            if n < 2 * m {
                return Err(insufficient(id, 2 * m, n));
            }
            Ok(smoothing::holt_winters(x, T::lit(alpha), T::lit(beta), T::lit(gamma), m))
        }
        Method::Theta { alpha } => {
            if n < 2 {
                return Err(insufficient(id, 2, n));
            }
            Ok(smoothing::theta(x, T::lit(alpha)))
        }
        Method::LinearTrend => {
            if n < 2 {
                return Err(insufficient(id, 2, n));
            }
            Ok(regression::linear_trend(x))
        }
        Method::ArLs { order } => {
            let p = order.unwrap_or_else(|| (n / 5).clamp(1, 8));
            let needed = 2 * p + 1;
            if n < needed {
                return Err(insufficient(id, needed, n));
            }
            regression::ar_ls(x, p)
        }
        Method::External { .. } => unreachable!("external methods are fitted lazily"),
    }
}

/// Forecasts `horizon` steps past the end of the training history.
pub fn predict<T: Scalar>(model: &FittedModel<T>, horizon: usize) -> Result<Forecast<T>, ForecastError> {
    if horizon == 0 {
        return Err(ForecastError::InvalidHorizon);
    }
    let values = match &model.state {
        ModelState::Channels(channels) => {
            let mut values = Array2::<T>::zeros((horizon, channels.len()));
            for (j, ch) in channels.iter().enumerate() {
                for (i, v) in ch.forecast(horizon).into_iter().enumerate() {
                    values[[i, j]] = v;
                }
            }
            values
        }
        ModelState::External { history } => {
            let Method::External { path, timeout } = Method::from_spec(&model.spec())? else {
                return Err(ForecastError::UnknownMethod(model.method_id.clone()));
            };
            let mut params = model.params.clone();
            params.remove("timeout_ms");
            let request = PluginRequest {
                history: history.iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect(),
                horizon,
                params,
                seed: model.seed,
            };
            let rows = run_external_method(&path, &request, timeout)?;
            let rows: Vec<Vec<T>> = rows.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect();
            from_rows(&rows).map_err(|e| ForecastError::PluginProtocolError(e.to_string()))?
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ForecastError::NonFinite);
    }
    Ok(Forecast { values, origin_index: model.train_length, horizon })
}

/// `fit` followed by `predict`.
pub fn fit_predict<T: Scalar>(
    spec: &MethodSpec,
    history: ArrayView2<'_, T>,
    horizon: usize,
) -> Result<Forecast<T>, ForecastError> {
    predict(&fit(spec, history)?, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn col(x: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((x.len(), 1), x.to_vec()).unwrap()
    }

    fn run(spec: MethodSpec, x: &[f64], h: usize) -> Vec<f64> {
        fit_predict(&spec, col(x).view(), h).unwrap().values.column(0).to_vec()
    }

    #[test]
    fn naive_carries_last_value() {
        assert_eq!(run(MethodSpec::new("naive"), &[1.0, 2.0, 3.0], 2), vec![3.0, 3.0]);
    }

    #[test]
    fn seasonal_naive_repeats_cycle() {
        let spec = MethodSpec::new("seasonal_naive").with_param("period", 2.0);
        assert_eq!(run(spec, &[1.0, 2.0, 1.0, 2.0], 3), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn drift_extends_endpoints_line() {
        assert_eq!(run(MethodSpec::new("drift"), &[1.0, 3.0], 2), vec![5.0, 7.0]);
    }

    #[test]
    fn ses_half_alpha() {
        assert_eq!(run(MethodSpec::new("ses").with_param("alpha", 0.5), &[2.0, 4.0], 3), vec![3.0; 3]);
    }

    #[test]
    fn mean_method() {
        assert_eq!(run(MethodSpec::new("mean"), &[1.0, 2.0, 6.0], 2), vec![3.0, 3.0]);
    }

    #[test]
    fn linear_trend_recovers_line() {
        let x: Vec<f64> = (0..10).map(|t| 3.0 * t as f64 + 1.0).collect();
        let m = fit(&MethodSpec::new("linear_trend"), col(&x).view()).unwrap();
        let ModelState::Channels(ch) = &m.state else { panic!() };
        let ChannelState::Linear { intercept, slope, .. } = ch[0] else { panic!() };
        assert!((slope - 3.0).abs() < 1e-12 && (intercept - 1.0).abs() < 1e-12);
        assert!((predict(&m, 1).unwrap().values[[0, 0]] - 31.0).abs() < 1e-9);
    }

    #[test]
    fn ar1_exact_recovery() {
        let x: Vec<f64> = (0..5).map(|t| 0.5f64.powi(t)).collect();
        let m = fit(&MethodSpec::new("ar_ls").with_param("order", 1.0), col(&x).view()).unwrap();
        let ModelState::Channels(ch) = &m.state else { panic!() };
        let ChannelState::Autoregressive { intercept, coefficients, ridge, .. } = &ch[0] else { panic!() };
        assert!(!ridge);
        assert!((coefficients[0] - 0.5).abs() < 1e-9, "{coefficients:?}");
        assert!(intercept.abs() < 1e-9);
    }

    #[test]
    fn ar_constant_series_uses_ridge() {
        let m = fit(&MethodSpec::new("ar_ls"), col(&[4.0; 20]).view()).unwrap();
        assert!(m.used_ridge_fallback());
        for v in predict(&m, 5).unwrap().values {
            assert!((v - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn insufficient_history() {
        let spec = MethodSpec::new("seasonal_naive").with_param("period", 5.0);
        assert_eq!(
            fit(&spec, col(&[1.0, 2.0, 3.0]).view()).unwrap_err(),
            ForecastError::InsufficientHistory { method: "seasonal_naive".into(), needed: 5, got: 3 }
        );
        let hw = MethodSpec::new("holt_winters").with_param("period", 4.0);
        assert!(matches!(fit(&hw, col(&[1.0; 7]).view()), Err(ForecastError::InsufficientHistory { .. })));
    }

    #[test]
    fn invalid_params_and_methods() {
        let bad = [
            MethodSpec::new("ses").with_param("alpha", 0.0),
            MethodSpec::new("ses").with_param("alpha", 1.5),
            MethodSpec::new("ses").with_param("beta", 0.5),
            MethodSpec::new("ar_ls").with_param("order", 1.5),
            MethodSpec::new("seasonal_naive").with_param("period", 0.0),
        ];
        for spec in bad {
            assert!(matches!(spec.validate(), Err(ForecastError::InvalidParam { .. })), "{spec:?}");
        }
        assert_eq!(MethodSpec::new("prophet").validate(), Err(ForecastError::UnknownMethod("prophet".into())));
    }

    #[test]
    fn horizon_zero() {
        let m = fit(&MethodSpec::new("naive"), col(&[1.0]).view()).unwrap();
        assert_eq!(predict(&m, 0).unwrap_err(), ForecastError::InvalidHorizon);
    }

    #[test]
    fn holt_continues_line() {
        let x: Vec<f64> = (0..30).map(|t| -2.0 + 0.75 * t as f64).collect();
        let f = run(MethodSpec::new("holt"), &x, 12);
        for (i, v) in f.iter().enumerate() {
            let t = 30 + i;
            assert!((v - (-2.0 + 0.75 * t as f64)).abs() < 1e-6);
        }
    }

    #[test]
    fn holt_winters_on_periodic_series() {
        let cycle = [3.0, 1.0, -2.0, 5.0, 0.0];
        let x: Vec<f64> = (0..40).map(|t| cycle[t % 5]).collect();
        let f = run(MethodSpec::new("holt_winters").with_param("period", 5.0), &x, 7);
        for (i, v) in f.iter().enumerate() {
            assert!((v - cycle[(40 + i) % 5]).abs() < 1e-9);
        }
    }

    #[test]
    fn auto_period_for_seasonal_methods() {
        let x: Vec<f64> = (0..96).map(|t| (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()).collect();
        let m = fit(&MethodSpec::new("seasonal_naive"), col(&x).view()).unwrap();
        let ModelState::Channels(ch) = &m.state else { panic!() };
        assert!(matches!(&ch[0], ChannelState::Seasonal { tail } if tail.len() == 12));
    }

    #[test]
    fn multichannel_independent() {
        let h = ndarray::array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]];
        let f = fit_predict(&MethodSpec::new("drift"), h.view(), 1).unwrap();
        assert_eq!(f.values, ndarray::array![[4.0, 40.0]]);
    }

    #[test]
    fn f32_models() {
        let h = Array2::from_shape_vec((4, 1), vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let f = fit_predict(&MethodSpec::new("linear_trend"), h.view(), 2).unwrap();
        assert!((f.values[[1, 0]] - 6.0).abs() < 1e-5);
    }

    fn history() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 24..80)
    }

    proptest! {
        #[test]
        fn constant_series_forecast_constant(c in -1e3f64..1e3, n in 24usize..60, h in 1usize..20) {
            for spec in MethodSpec::all_builtin() {
                let f = run(spec.clone(), &vec![c; n], h);
                for v in f {
                    prop_assert!((v - c).abs() <= 1e-6 * (1.0 + c.abs()), "{} gave {v} for {c}", spec.method_id);
                }
            }
        }

        #[test]
        fn ses_alpha_one_is_naive(x in history(), h in 1usize..10) {
            let a = run(MethodSpec::new("ses").with_param("alpha", 1.0), &x, h);
            let b = run(MethodSpec::new("naive"), &x, h);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn json_round_trip_predicts_identically(x in history(), h in 1usize..10, which in 0usize..10) {
            let spec = MethodSpec::new(BUILTIN_METHODS[which]);
            let m = fit(&spec, col(&x).view()).unwrap();
            let back = FittedModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
            prop_assert_eq!(predict(&m, h).unwrap(), predict(&back, h).unwrap());
        }

        #[test]
        fn deterministic(x in history(), which in 0usize..10) {
            let spec = MethodSpec::new(BUILTIN_METHODS[which]).with_seed(9);
            prop_assert_eq!(fit(&spec, col(&x).view()).unwrap(), fit(&spec, col(&x).view()).unwrap());
        }
    }
}
