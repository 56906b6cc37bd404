//! Point-forecast accuracy metrics. Means run over all `h × c` cells.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Mse,
    Rmse,
    Mape,
    Smape,
    Mase,
}

impl Metric {
    pub const ALL: [Metric; 6] = [Metric::Mae, Metric::Mse, Metric::Rmse, Metric::Mape, Metric::Smape, Metric::Mase];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Mse => "mse",
            Metric::Rmse => "rmse",
            Metric::Mape => "mape",
            Metric::Smape => "smape",
            Metric::Mase => "mase",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("shape mismatch: actual {actual:?} vs forecast {forecast:?}")]
    ShapeMismatch { actual: (usize, usize), forecast: (usize, usize) },
    #[error("no cells to score")]
    Empty,
    #[error("every actual value is within 1e-8 of zero; mape is undefined")]
    AllTermsExcluded,
    #[error("in-sample seasonal naive error is zero; mase is undefined")]
    ZeroScale,
    #[error("mase needs more than {period} context points, got {got}")]
    InsufficientContext { period: usize, got: usize },
}

const MAPE_FLOOR: f64 = 1e-8;
const MASE_FLOOR: f64 = 1e-12;

fn mean_over<T: Scalar>(y: &ArrayView2<'_, T>, yhat: &ArrayView2<'_, T>, f: impl Fn(T, T) -> T) -> T {
    let n = T::from_usize_lossy(y.len());
    y.iter().zip(yhat.iter()).map(|(&a, &b)| f(a, b)).sum::<T>() / n
}

/// In-sample seasonal-naive MAE of `context` at lag `period`.
pub fn seasonal_naive_scale<T: Scalar>(context: ArrayView2<'_, T>, period: usize) -> Result<T, MetricError> {
    let n = context.nrows();
    let period = period.max(1);
    if n <= period {
        return Err(MetricError::InsufficientContext { period, got: n });
    }
    let diffs = &context.slice(ndarray::s![period.., ..]) - &context.slice(ndarray::s![..n - period, ..]);
    Ok(diffs.iter().map(|d| d.abs()).sum::<T>() / T::from_usize_lossy(diffs.len()))
}

pub fn compute_metric<T: Scalar>(
    metric: Metric,
    y: ArrayView2<'_, T>,
    yhat: ArrayView2<'_, T>,
    train_context: ArrayView2<'_, T>,
    seasonal_period: usize,
) -> Result<T, MetricError> {
    if y.dim() != yhat.dim() {
        return Err(MetricError::ShapeMismatch { actual: y.dim(), forecast: yhat.dim() });
    }
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    let hundred = T::lit(100.0);
    let two = T::lit(2.0);
    Ok(match metric {
        Metric::Mae => mean_over(&y, &yhat, |a, b| (a - b).abs()),
        Metric::Mse => mean_over(&y, &yhat, |a, b| (a - b) * (a - b)),
        Metric::Rmse => mean_over(&y, &yhat, |a, b| (a - b) * (a - b)).sqrt(),
        Metric::Mape => {
            let floor = T::lit(MAPE_FLOOR);
            let mut total = T::zero();
            let mut count = 0usize;
            for (&a, &b) in y.iter().zip(yhat.iter()) {
                if a.abs() >= floor {
                    total = total + (a - b).abs() / a.abs();
                    count += 1;
                }
            }
            if count == 0 {
                return Err(MetricError::AllTermsExcluded);
            }
            hundred * total / T::from_usize_lossy(count)
        }
        Metric::Smape => {
            hundred
                * mean_over(&y, &yhat, |a, b| {
                    let denom = a.abs() + b.abs();
                    if denom == T::zero() {
                        T::zero()
                    } else {
                        two * (a - b).abs() / denom
                    }
                })
        }
        Metric::Mase => {
            let scale = seasonal_naive_scale(train_context, seasonal_period)?;
            if scale.as_f64() < MASE_FLOOR {
                return Err(MetricError::ZeroScale);
            }
            mean_over(&y, &yhat, |a, b| (a - b).abs()) / scale
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn col(x: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((x.len(), 1), x.to_vec()).unwrap()
    }

    fn m(metric: Metric, y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
        compute_metric(metric, col(y).view(), col(yhat).view(), col(&[1.0, 2.0, 3.0, 4.0]).view(), 1)
    }

    #[test]
    fn identity_is_zero() {
        assert_eq!(m(Metric::Mae, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn smape_hand_value() {
        assert_eq!(m(Metric::Smape, &[1.0], &[3.0]).unwrap(), 100.0);
        assert_eq!(m(Metric::Smape, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn mase_hand_value() {
        assert_eq!(m(Metric::Mase, &[5.0, 6.0], &[5.0, 7.0]).unwrap(), 0.5);
    }

    #[test]
    fn mase_edge_cases() {
        let flat = col(&[2.0, 2.0, 2.0]);
        let y = col(&[1.0]);
        assert_eq!(
            compute_metric(Metric::Mase, y.view(), y.view(), flat.view(), 1).unwrap_err(),
            MetricError::ZeroScale
        );
        assert_eq!(
            compute_metric(Metric::Mase, y.view(), y.view(), flat.view(), 3).unwrap_err(),
            MetricError::InsufficientContext { period: 3, got: 3 }
        );
    }

    #[test]
    fn mape_exclusion() {
        assert_eq!(m(Metric::Mape, &[0.0, 2.0], &[5.0, 1.0]).unwrap(), 50.0);
        assert_eq!(m(Metric::Mape, &[0.0, 1e-9], &[1.0, 1.0]).unwrap_err(), MetricError::AllTermsExcluded);
    }

    #[test]
    fn shape_and_name_errors() {
        let a = array![[1.0, 2.0]];
        let b = array![[1.0], [2.0]];
        assert!(matches!(
            compute_metric(Metric::Mae, a.view(), b.view(), a.view(), 1),
            Err(MetricError::ShapeMismatch { .. })
        ));
        assert_eq!("MAE".parse::<Metric>().unwrap_err(), MetricError::UnknownMetric("MAE".into()));
        assert_eq!("rmse".parse::<Metric>().unwrap(), Metric::Rmse);
    }

    #[test]
    fn rmse_is_sqrt_mse_f32() {
        let y = array![[1.0f32], [4.0]];
        let f = array![[2.0f32], [2.0]];
        let mse = compute_metric(Metric::Mse, y.view(), f.view(), y.view(), 1).unwrap();
        let rmse = compute_metric(Metric::Rmse, y.view(), f.view(), y.view(), 1).unwrap();
        assert_eq!(mse, 2.5);
        assert!((rmse - 2.5f32.sqrt()).abs() < 1e-6);
    }
}
