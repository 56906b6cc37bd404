//! Dataset characteristics and the fixed-length representation vector.
//!
//! Everything here operates on `f64` copies of the input; the per-series
//! cost is small and the scores are reported as `f64` regardless of the
//! element type of the series.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::TimeSeries;
use crate::Scalar;

/// Bumped whenever the layout or semantics of [`RepresentationVector`] change.
/// Classifier artifacts record it and refuse to load across versions.
pub const REPRESENTATION_VERSION: u32 = 1;

pub const REPRESENTATION_DIM: usize = 16;

/// Tunable thresholds shared by feature extraction and the Q&A filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConstants {
    /// Minimum autocorrelation for a lag to be accepted as the period.
    pub acf_acceptance: f64,
    pub max_period_lag: usize,
    /// CUSUM exceedance level, in multiples of `sqrt(n)`.
    pub cusum_factor: f64,
    /// Upper cap of the smoothing window used when no period is present.
    pub trend_window_cap: usize,
    /// "strong"/"with trends" filters select scores above this value.
    pub strong_threshold: f64,
    /// "weak"/"low" filters select scores below this value.
    pub weak_threshold: f64,
    pub min_period_length: usize,
    pub min_feature_length: usize,
}

pub const CONSTANTS: FeatureConstants = FeatureConstants {
    acf_acceptance: 0.1,
    max_period_lag: 512,
    cusum_factor: 1.5,
    trend_window_cap: 11,
    strong_threshold: 0.6,
    weak_threshold: 0.4,
    min_period_length: 8,
    min_feature_length: 16,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
}

/// The six named scores, each in `[0, 1]`, plus the detected period (0 = none).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicVector {
    pub seasonality: f64,
    pub trend: f64,
    pub transition: f64,
    pub shifting: f64,
    pub stationarity: f64,
    pub correlation: f64,
    pub detected_period: usize,
}

impl CharacteristicVector {
    pub const NAMES: [&'static str; 6] =
        ["seasonality", "trend", "transition", "shifting", "stationarity", "correlation"];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "seasonality" => self.seasonality,
            "trend" => self.trend,
            "transition" => self.transition,
            "shifting" => self.shifting,
            "stationarity" => self.stationarity,
            "correlation" => self.correlation,
            _ => return None,
        })
    }
}

/// `[trend, seasonality, stationarity, shifting, transition, correlation,
///   acf(1..=5) of the channel mean, acf(1) of its first difference,
///   squashed coefficient of variation, log10(n)/6, period/n, 1]`.
///
/// Autocorrelations are mapped from `[-1, 1]` to `[0, 1]` via `(r + 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationVector(pub [f64; REPRESENTATION_DIM]);

impl RepresentationVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample autocorrelation at `lag`; zero-variance input yields 0.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag >= n {
        return 0.0;
    }
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if denom < 1e-12 * n as f64 * (1.0 + m * m) || denom == 0.0 {
        return 0.0;
    }
    let num: f64 = (lag..n).map(|t| (x[t] - m) * (x[t - lag] - m)).sum();
    (num / denom).clamp(-1.0, 1.0)
}

/// Dominant period from local maxima of the autocorrelation function.
pub fn detect_period(x: &[f64]) -> Result<usize, FeatureError> {
    let n = x.len();
    if n < CONSTANTS.min_period_length {
        return Err(FeatureError::SeriesTooShort { needed: CONSTANTS.min_period_length, got: n });
    }
    let max_lag = (n / 2).min(CONSTANTS.max_period_lag);
    if max_lag < 2 {
        return Ok(0);
    }
    let upper = (max_lag + 1).min(n - 1);
    let r: Vec<f64> = (0..=upper).map(|l| autocorrelation(x, l)).collect();
    let mut best: Option<(usize, f64)> = None;
    for lag in 2..=max_lag {
        let left = r[lag - 1];
        let right = if lag < upper { r[lag + 1] } else { f64::NEG_INFINITY };
        if r[lag] > left && r[lag] >= right && best.is_none_or(|(_, v)| r[lag] > v) {
            best = Some((lag, r[lag]));
        }
    }
    Ok(match best {
        Some((lag, v)) if v > CONSTANTS.acf_acceptance => lag,
        _ => 0,
    })
}

/// Classical additive decomposition restricted to the points where the
/// centered moving average is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Indices of the input covered by `trend` and `remainder`.
    pub valid: Range<usize>,
    pub trend: Vec<f64>,
    /// Seasonal component over the full input length.
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
}

fn largest_odd_at_most(v: usize) -> usize {
    match v {
        0 => 1,
        v if v % 2 == 0 => v - 1,
        v => v,
    }
}

fn centered_average(x: &[f64], window: usize) -> (Range<usize>, Vec<f64>) {
    let n = x.len();
    if window % 2 == 1 {
        let k = window / 2;
        if n < window {
            return (0..0, Vec::new());
        }
        let trend = (k..n - k).map(|t| mean(&x[t - k..=t + k])).collect();
        (k..n - k, trend)
    } else {
        // 2×m average: half weights on the two outermost points.
        let k = window / 2;
        if n <= window {
            return (0..0, Vec::new());
        }
        let m = window as f64;
        let trend = (k..n - k)
            .map(|t| {
                let inner: f64 = x[t + 1 - k..t + k].iter().sum();
                (0.5 * x[t - k] + inner + 0.5 * x[t + k]) / m
            })
            .collect();
        (k..n - k, trend)
    }
}

pub fn decompose(x: &[f64], period: usize) -> Result<Decomposition, FeatureError> {
    let n = x.len();
    if period >= 2 {
        if n < 2 * period {
            return Err(FeatureError::SeriesTooShort { needed: 2 * period, got: n });
        }
        let (valid, trend) = centered_average(x, period);
        let mut sums = vec![0.0; period];
        let mut counts = vec![0usize; period];
        for (i, t) in valid.clone().enumerate() {
            sums[t % period] += x[t] - trend[i];
            counts[t % period] += 1;
        }
        let phase: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
        let centre = mean(&phase);
        let phase: Vec<f64> = phase.iter().map(|p| p - centre).collect();
        let seasonal: Vec<f64> = (0..n).map(|t| phase[t % period]).collect();
        let remainder = valid.clone().enumerate().map(|(i, t)| x[t] - trend[i] - seasonal[t]).collect();
        return Ok(Decomposition { valid, trend, seasonal, remainder });
    }
    if n == 0 {
        return Err(FeatureError::SeriesTooShort { needed: 1, got: 0 });
    }
    let window = CONSTANTS.trend_window_cap.min(largest_odd_at_most(n / 4));
    let (valid, trend) = centered_average(x, window);
    let remainder = valid.clone().enumerate().map(|(i, t)| x[t] - trend[i]).collect();
    Ok(Decomposition { valid, trend, seasonal: vec![0.0; n], remainder })
}

fn strength(remainder: &[f64], component: &[f64]) -> f64 {
    let combined: Vec<f64> = component.iter().zip(remainder).map(|(a, b)| a + b).collect();
    let denom = variance(&combined);
    if denom < 1e-12 {
        return 0.0;
    }
    (1.0 - variance(remainder) / denom).clamp(0.0, 1.0)
}

fn population_std(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va < 1e-24 || vb < 1e-24 {
        return 0.0;
    }
    (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)
}

/// Number of times the standardized cumulative sum enters the region
/// `|C_k| > cusum_factor·sqrt(n)`.
fn cusum_crossings(x: &[f64]) -> usize {
    let sd = population_std(x);
    if sd < 1e-12 {
        return 0;
    }
    let m = mean(x);
    let limit = CONSTANTS.cusum_factor * (x.len() as f64).sqrt();
    let mut cum = 0.0;
    let mut outside = false;
    let mut count = 0;
    for v in x {
        cum += (v - m) / sd;
        let now = cum.abs() > limit;
        if now && !outside {
            count += 1;
        }
        outside = now;
    }
    count
}

fn check_len(n: usize) -> Result<(), FeatureError> {
    if n < CONSTANTS.min_feature_length {
        return Err(FeatureError::SeriesTooShort { needed: CONSTANTS.min_feature_length, got: n });
    }
    Ok(())
}

pub fn characteristics<T: Scalar>(series: &TimeSeries<T>) -> Result<CharacteristicVector, FeatureError> {
    check_len(series.len())?;
    let x = series.channel_mean();
    let n = x.len();
    let period = detect_period(&x)?;
    let dec = decompose(&x, period)?;

    let trend = strength(&dec.remainder, &dec.trend);
    let seasonality = if period >= 2 { strength(&dec.remainder, &dec.seasonal[dec.valid.clone()]) } else { 0.0 };
    let stationarity = 1.0 - autocorrelation(&x, 1).max(0.0);

    let half = n / 2;
    let s = (mean(&x[half..]) - mean(&x[..half])).abs() / (population_std(&x) + 1e-12);
    let shifting = s / (1.0 + s);

    let k = cusum_crossings(&x) as f64;
    let transition = k / (1.0 + k);

    let c = series.n_channels();
    let correlation = if c < 2 {
        0.0
    } else {
        let channels: Vec<Vec<f64>> = (0..c).map(|j| series.channel(j).iter().map(|v| v.as_f64()).collect()).collect();
        let mut total = 0.0;
        let mut pairs = 0usize;
        for a in 0..c {
            for b in a + 1..c {
                total += pearson(&channels[a], &channels[b]).abs();
                pairs += 1;
            }
        }
        total / pairs as f64
    };

    Ok(CharacteristicVector {
        seasonality,
        trend,
        transition,
        shifting,
        stationarity,
        correlation,
        detected_period: period,
    })
}

fn squash_acf(r: f64) -> f64 {
    ((r + 1.0) / 2.0).clamp(0.0, 1.0)
}

pub fn representation<T: Scalar>(series: &TimeSeries<T>) -> Result<RepresentationVector, FeatureError> {
    let ch = characteristics(series)?;
    let x = series.channel_mean();
    let n = x.len();
    let diff: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();

    let sd = population_std(&x);
    let mu = mean(&x).abs();
    let cv = if sd < 1e-12 {
        0.0
    } else if mu < 1e-12 {
        1.0
    } else {
        let v = sd / mu;
        v / (1.0 + v)
    };

    let mut out = [0.0; REPRESENTATION_DIM];
    out[0] = ch.trend;
    out[1] = ch.seasonality;
    out[2] = ch.stationarity;
    out[3] = ch.shifting;
    out[4] = ch.transition;
    out[5] = ch.correlation;
    for lag in 1..=5 {
        out[5 + lag] = squash_acf(autocorrelation(&x, lag));
    }
    out[11] = squash_acf(autocorrelation(&diff, 1));
    out[12] = cv;
    out[13] = ((n as f64).log10() / 6.0).clamp(0.0, 1.0);
    out[14] = ch.detected_period as f64 / n as f64;
    out[15] = 1.0;
    Ok(RepresentationVector(out))
}
