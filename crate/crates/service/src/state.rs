use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use easytime_core::automl::{pretrained_model, AutomlError, ClassifierModel};
use easytime_core::csv_io::{parse_dataset_csv, CsvOptions};
use easytime_core::pipeline::{dataset_meta, DatasetMeta};
use easytime_core::{DataError, Series};
use easytime_qa::{DemoError, QaEngine, SessionHistory};
use easytime_store::{DatasetRow, RunStatus, Store, StoreError};
use thiserror::Error;

use crate::config::ServiceConfig;
use crate::jobs::JobRegistry;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot load model: {0}")]
    Model(#[from] AutomlError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error("{path}: {source}")]
    Dataset { path: String, source: DataError },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct DatasetEntry {
    pub meta: DatasetMeta,
    pub series: Arc<Series>,
}

/// Shared state behind every handler and job.
pub struct AppState {
    pub config: ServiceConfig,
    /// The only writer of the results store.
    pub store: Mutex<Store>,
    pub datasets: RwLock<BTreeMap<String, DatasetEntry>>,
    pub model: Arc<ClassifierModel>,
    pub jobs: JobRegistry,
    pub qa: QaEngine,
    pub sessions: Mutex<HashMap<String, SessionHistory>>,
}

impl AppState {
    /// Opens the store, loads the model and the data directory, and starts
    /// the job workers on the current runtime.
    pub fn new(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        config.validate()?;
        let model = match &config.model {
            Some(path) => ClassifierModel::from_json(&std::fs::read_to_string(path)?)?,
            None => pretrained_model(),
        };
        let mut store = Store::open(&config.results_db)?;
        let mut datasets = BTreeMap::new();
        if config.seed_demo {
            if store.count_runs(RunStatus::Ok)? == 0 && store.count_runs(RunStatus::Failed)? == 0 {
                tracing::info!("seeding the demo benchmark");
                easytime_qa::demo::populate_demo_store(&mut store)?;
            }
            for series in easytime_qa::demo_corpus()? {
                register(&mut datasets, series);
            }
        }
        if let Some(dir) = &config.data_dir {
            std::fs::create_dir_all(dir)?;
            for series in load_data_dir(dir, &store)? {
                store.insert_dataset(&DatasetRow::from(&dataset_meta(&series)))?;
                register(&mut datasets, series);
            }
        }
        let jobs = JobRegistry::start(config.workers, config.queue_capacity);
        Ok(Arc::new(Self {
            config,
            store: Mutex::new(store),
            datasets: RwLock::new(datasets),
            model: Arc::new(model),
            jobs,
            qa: QaEngine::from_env(),
            sessions: Mutex::default(),
        }))
    }

    pub fn dataset(&self, id: &str) -> Option<(DatasetMeta, Arc<Series>)> {
        let datasets = self.datasets.read().expect("dataset registry poisoned");
        datasets.get(id).map(|e| (e.meta.clone(), Arc::clone(&e.series)))
    }
}

pub fn register(datasets: &mut BTreeMap<String, DatasetEntry>, series: Series) -> DatasetMeta {
    let meta = dataset_meta(&series);
    datasets.insert(meta.dataset_id.clone(), DatasetEntry { meta: meta.clone(), series: Arc::new(series) });
    meta
}

/// Every `*.csv` in `dir`, keyed by file stem; domain and frequency come
/// from the store when it knows the dataset.
fn load_data_dir(dir: &Path, store: &Store) -> Result<Vec<Series>, ServiceError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let Some(id) = path.file_stem().map(|s| s.to_string_lossy().into_owned()) else { continue };
        let raw = std::fs::read(&path)?;
        let mut series: Series = parse_dataset_csv(&raw, &id, &CsvOptions::default())
            .map_err(|source| ServiceError::Dataset { path: path.display().to_string(), source })?;
        if let Some(row) = store.dataset(&id)? {
            series = series.with_domain(row.domain);
            if let Some(f) = row.frequency {
                series = series.with_frequency(f);
            }
        }
        out.push(series);
    }
    Ok(out)
}
