//! The benchmark sweep: every (series, method) cell of a corpus, evaluated
//! on a worker pool, with results funneled through one sink writer.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{evaluate, EvalConfig, EvalError, EvalRecord};
use crate::features::{characteristics, CharacteristicVector};
use crate::forecasters::MethodSpec;
use crate::series::TimeSeries;
use crate::Scalar;

/// Descriptive row for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub dataset_id: String,
    pub name: String,
    pub domain: String,
    pub n_channels: usize,
    pub length: usize,
    #[serde(default)]
    pub frequency: Option<String>,
    pub characteristics: CharacteristicVector,
}

/// Metadata of `series`; series too short for feature extraction get all-zero scores.
pub fn dataset_meta<T: Scalar>(series: &TimeSeries<T>) -> DatasetMeta {
    DatasetMeta {
        dataset_id: series.id().to_string(),
        name: series.id().to_string(),
        domain: series.domain().unwrap_or("user").to_string(),
        n_channels: series.n_channels(),
        length: series.len(),
        frequency: series.frequency().map(str::to_string),
        characteristics: characteristics(series).unwrap_or_default(),
    }
}

/// A (series, method) cell that did not produce a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub dataset_id: String,
    pub method: MethodSpec,
    pub config_digest: String,
    pub error: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("sink unavailable: {0}")]
pub struct SinkError(pub String);

/// Destination of pipeline output. Called from a single thread.
pub trait RecordSink {
    fn put_dataset(&mut self, meta: &DatasetMeta) -> Result<(), SinkError>;
    fn put_method(&mut self, spec: &MethodSpec) -> Result<(), SinkError>;
    fn put_record(&mut self, record: &EvalRecord, spec: &MethodSpec, config: &EvalConfig) -> Result<(), SinkError>;
    fn put_failure(&mut self, failure: &FailedRun, config: &EvalConfig) -> Result<(), SinkError>;
}

/// Keeps everything in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub datasets: Vec<DatasetMeta>,
    pub methods: Vec<MethodSpec>,
    pub records: Vec<EvalRecord>,
    pub failures: Vec<FailedRun>,
}

impl RecordSink for MemorySink {
    fn put_dataset(&mut self, meta: &DatasetMeta) -> Result<(), SinkError> {
        self.datasets.push(meta.clone());
        Ok(())
    }
    fn put_method(&mut self, spec: &MethodSpec) -> Result<(), SinkError> {
        self.methods.push(spec.clone());
        Ok(())
    }
    fn put_record(&mut self, record: &EvalRecord, _: &MethodSpec, _: &EvalConfig) -> Result<(), SinkError> {
        self.records.push(record.clone());
        Ok(())
    }
    fn put_failure(&mut self, failure: &FailedRun, _: &EvalConfig) -> Result<(), SinkError> {
        self.failures.push(failure.clone());
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    SinkUnavailable(#[from] SinkError),
    #[error("invalid pipeline input: {0}")]
    InvalidInput(String),
}

pub type ProgressFn<'a> = dyn Fn(usize, usize) + Sync + 'a;

#[derive(Default)]
pub struct PipelineOptions<'a> {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Called with `(completed_cells, total_cells)` as cells finish.
    pub progress: Option<&'a ProgressFn<'a>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineSummary {
    pub ok: usize,
    pub failed: Vec<FailedRun>,
}

/// Runs `job` over every cell of `rows × cols` on a pool of `workers`
/// threads, returning results in row-major order.
pub(crate) fn sweep<R, F>(rows: usize, cols: usize, options: &PipelineOptions<'_>, job: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, usize) -> R + Sync,
{
    let total = rows * cols;
    let done = AtomicUsize::new(0);
    let run = || {
        (0..total)
            .into_par_iter()
            .map(|cell| {
                let out = job(cell / cols, cell % cols);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(cb) = options.progress {
                    cb(finished, total);
                }
                out
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(options.workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

/// Evaluates every (series, method) pair and writes the outcomes to `sink`.
///
/// A failing cell becomes a failed-run entry; only sink failures abort.
pub fn run_pipeline<T: Scalar>(
    corpus: &[TimeSeries<T>],
    methods: &[MethodSpec],
    config: &EvalConfig,
    sink: &mut dyn RecordSink,
    options: &PipelineOptions<'_>,
) -> Result<PipelineSummary, PipelineError> {
    if methods.is_empty() {
        return Err(PipelineError::InvalidInput("no methods".into()));
    }
    let results: Vec<Result<EvalRecord, EvalError>> =
        sweep(corpus.len(), methods.len(), options, |i, j| evaluate(&corpus[i], &methods[j], config));

    for spec in methods {
        sink.put_method(spec)?;
    }
    for series in corpus {
        sink.put_dataset(&dataset_meta(series))?;
    }
    let digest = config.digest();
    let mut summary = PipelineSummary::default();
    for (cell, result) in results.into_iter().enumerate() {
        let (series, spec) = (&corpus[cell / methods.len()], &methods[cell % methods.len()]);
        match result {
            Ok(record) => {
                sink.put_record(&record, spec, config)?;
                summary.ok += 1;
            }
            Err(err) => {
                let failure = FailedRun {
                    dataset_id: series.id().to_string(),
                    method: spec.clone(),
                    config_digest: digest.clone(),
                    error: err.to_string(),
                };
                sink.put_failure(&failure, config)?;
                summary.failed.push(failure);
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_synthetic, SyntheticSpec};

    fn corpus() -> Vec<TimeSeries<f64>> {
        (0..2).map(|i| generate_synthetic(&SyntheticSpec::default(), i).unwrap().with_id(format!("s{i}"))).collect()
    }

    #[test]
    fn cross_product() {
        let methods = vec![MethodSpec::new("naive"), MethodSpec::new("ses"), MethodSpec::new("theta")];
        let mut sink = MemorySink::default();
        let s = run_pipeline(&corpus(), &methods, &EvalConfig::default(), &mut sink, &Default::default()).unwrap();
        assert_eq!(s.ok, 6);
        assert_eq!(sink.records.len(), 6);
        assert_eq!(sink.datasets.len(), 2);
    }

    #[test]
    fn failures_are_isolated() {
        let mut c = corpus();
        c[1] = c[1].prefix(60).unwrap();
        let methods = vec![
            MethodSpec::new("naive"),
            MethodSpec::new("mean"),
            MethodSpec::new("seasonal_naive").with_param("period", 50.0),
        ];
        let cfg = EvalConfig { horizon: 6, ..EvalConfig::default() };
        let mut sink = MemorySink::default();
        let s = run_pipeline(&c, &methods, &cfg, &mut sink, &Default::default()).unwrap();
        assert_eq!(s.ok, 5);
        assert_eq!(sink.failures.len(), 1);
        assert_eq!(sink.failures[0].dataset_id, "s1");
        assert!(
            sink.failures[0].error.contains("InsufficientHistory") || sink.failures[0].error.contains("at least 50")
        );
    }

    struct Broken;
    impl RecordSink for Broken {
        fn put_dataset(&mut self, _: &DatasetMeta) -> Result<(), SinkError> {
            Err(SinkError("disk gone".into()))
        }
        fn put_method(&mut self, _: &MethodSpec) -> Result<(), SinkError> {
            Ok(())
        }
        fn put_record(&mut self, _: &EvalRecord, _: &MethodSpec, _: &EvalConfig) -> Result<(), SinkError> {
            Ok(())
        }
        fn put_failure(&mut self, _: &FailedRun, _: &EvalConfig) -> Result<(), SinkError> {
            Ok(())
        }
    }

    #[test]
    fn sink_failure_aborts() {
        let r = run_pipeline(
            &corpus(),
            &[MethodSpec::new("naive")],
            &EvalConfig::default(),
            &mut Broken,
            &Default::default(),
        );
        assert!(matches!(r, Err(PipelineError::SinkUnavailable(_))));
    }
}
