//! Core of the forecasting workbench: the series model, built-in
//! forecasters, evaluation strategies and metrics, dataset features, and
//! the recommend-then-ensemble machinery.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the store, Q&A and service use.

pub mod automl;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod forecasters;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod scalar;
pub mod series;
pub mod split;
pub mod synthetic;

pub use error::DataError;
pub use scalar::Scalar;

pub type Series = series::TimeSeries<f64>;
pub type Series32 = series::TimeSeries<f32>;
pub type Model = forecasters::FittedModel<f64>;
pub type Forecast = forecasters::Forecast<f64>;
pub type Normalizer = normalize::NormalizerState<f64>;
pub type Ensemble = automl::EnsembleModel<f64>;
