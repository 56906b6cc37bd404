//! A small, fully deterministic benchmark store for trying out questions.
//!
//! Twelve synthetic datasets across six domains are run through the real
//! evaluation pipeline with every built-in method at horizons 24, 48, 96
//! and 192.

use std::path::Path;

use easytime_core::evaluation::{EvalConfig, Strategy};
use easytime_core::forecasters::MethodSpec;
use easytime_core::pipeline::{run_pipeline, PipelineError, PipelineOptions};
use easytime_core::synthetic::{generate_synthetic, SyntheticSpec};
use easytime_core::{DataError, Series};
use easytime_store::{Store, StoreError};
use thiserror::Error;

pub const DEMO_HORIZONS: [usize; 4] = [24, 48, 96, 192];
pub const DEMO_TIMESTAMP: &str = "2024-01-01T00:00:00Z";
const DEMO_LENGTH: usize = 1200;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Data(#[from] DataError),
}

struct Entry {
    name: &'static str,
    domain: &'static str,
    spec: SyntheticSpec,
}

fn spec(channels: usize, period: usize, trend_slope: f64, season_amp: f64, noise_sd: f64) -> SyntheticSpec {
    SyntheticSpec {
        length: DEMO_LENGTH,
        period,
        trend_slope,
        season_amp,
        noise_sd,
        channels,
        cross_corr: (channels > 1).then_some(0.6),
        level: 20.0,
        ..SyntheticSpec::default()
    }
}

fn shifted(mut s: SyntheticSpec, at: usize, size: f64) -> SyntheticSpec {
    s.level_shift_at = Some(at);
    s.shift_size = Some(size);
    s
}

fn entries() -> Vec<Entry> {
    vec![
        Entry { name: "ETTh1-like", domain: "energy", spec: spec(3, 24, 0.01, 3.0, 0.5) },
        Entry { name: "electricity-like", domain: "energy", spec: spec(4, 24, 0.02, 2.0, 0.6) },
        Entry { name: "traffic-like", domain: "traffic", spec: spec(3, 24, 0.0, 4.0, 0.5) },
        Entry { name: "pems-like", domain: "traffic", spec: spec(1, 12, 0.0, 3.0, 0.8) },
        Entry { name: "exchange-like", domain: "finance", spec: spec(2, 0, 0.015, 0.0, 0.3) },
        Entry { name: "stock-like", domain: "finance", spec: shifted(spec(1, 0, 0.005, 0.0, 0.6), 700, 4.0) },
        Entry { name: "weather-like", domain: "weather", spec: spec(3, 24, 0.004, 2.5, 0.7) },
        Entry { name: "climate-like", domain: "weather", spec: spec(1, 12, 0.01, 2.0, 0.3) },
        Entry { name: "retail-like", domain: "sales", spec: spec(2, 7, 0.02, 2.0, 0.6) },
        Entry { name: "demand-like", domain: "sales", spec: spec(1, 7, 0.0, 1.5, 1.0) },
        Entry { name: "web-traffic-like", domain: "web", spec: shifted(spec(1, 0, 0.0, 0.0, 1.0), 800, 6.0) },
        Entry { name: "server-load-like", domain: "web", spec: shifted(spec(2, 24, 0.0, 1.0, 0.5), 600, 3.0) },
    ]
}

pub fn demo_corpus() -> Result<Vec<Series>, DemoError> {
    entries()
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let series: Series = generate_synthetic(&e.spec, 7_000 + i as u64)?;
            Ok(series.with_id(e.name).with_domain(e.domain).with_frequency("h"))
        })
        .collect()
}

/// Evaluation settings for one demo horizon.
pub fn demo_config(horizon: usize) -> EvalConfig {
    EvalConfig { strategy: Strategy::Rolling, horizon, stride: Some(horizon), ..EvalConfig::default() }
}

/// Fills `store` with the demo benchmark.
pub fn populate_demo_store(store: &mut Store) -> Result<(), DemoError> {
    let corpus = demo_corpus()?;
    let methods = MethodSpec::all_builtin();
    for horizon in DEMO_HORIZONS {
        run_pipeline(&corpus, &methods, &demo_config(horizon), store, &PipelineOptions::default())?;
    }
    Ok(())
}

pub fn demo_store_in_memory() -> Result<Store, DemoError> {
    let mut store = Store::open_in_memory()?.with_fixed_timestamp(DEMO_TIMESTAMP);
    populate_demo_store(&mut store)?;
    Ok(store)
}

/// Builds the demo store at `path`; an existing demo store is refreshed in place.
pub fn build_demo_store(path: impl AsRef<Path>) -> Result<Store, DemoError> {
    let mut store = Store::open(path)?.with_fixed_timestamp(DEMO_TIMESTAMP);
    populate_demo_store(&mut store)?;
    Ok(store)
}
