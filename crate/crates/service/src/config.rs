use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_LISTEN: &str = "EASYTIME_LISTEN";
pub const ENV_RESULTS_DB: &str = "EASYTIME_RESULTS_DB";
pub const ENV_DATA_DIR: &str = "EASYTIME_DATA_DIR";
pub const ENV_MODEL: &str = "EASYTIME_MODEL";
pub const ENV_WORKERS: &str = "EASYTIME_WORKERS";

pub const MAX_UPLOAD_BYTES: usize = 50 * 1024 * 1024;
pub const QUEUE_CAPACITY: usize = 64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid service config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub results_db: PathBuf,
    /// Uploaded CSVs are kept here and reloaded on start; in memory only when unset.
    pub data_dir: Option<PathBuf>,
    /// Classifier to recommend with; the shipped model when unset.
    pub model: Option<PathBuf>,
    /// Job workers.
    pub workers: usize,
    /// Pending jobs beyond this are refused.
    pub queue_capacity: usize,
    pub max_upload_bytes: usize,
    /// Fill an empty results store with the demo benchmark and register its datasets.
    pub seed_demo: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            results_db: "results.db".into(),
            data_dir: None,
            model: None,
            workers: 4,
            queue_capacity: QUEUE_CAPACITY,
            max_upload_bytes: MAX_UPLOAD_BYTES,
            seed_demo: false,
        }
    }
}

impl ServiceConfig {
    /// Reads a JSON config file; relative paths in it are taken from its directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.results_db = base.join(&config.results_db);
        config.data_dir = config.data_dir.map(|d| base.join(d));
        config.model = config.model.map(|m| base.join(m));
        Ok(config)
    }

    /// Applies the `EASYTIME_*` environment overrides.
    pub fn with_env(self) -> Result<Self, ConfigError> {
        self.with_overrides(|k| std::env::var(k).ok())
    }

    pub fn with_overrides(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(v) = var(ENV_LISTEN) {
            self.listen = v;
        }
        if let Some(v) = var(ENV_RESULTS_DB) {
            self.results_db = v.into();
        }
        if let Some(v) = var(ENV_DATA_DIR) {
            self.data_dir = Some(v.into());
        }
        if let Some(v) = var(ENV_MODEL) {
            self.model = Some(v.into());
        }
        if let Some(v) = var(ENV_WORKERS) {
            self.workers =
                v.trim().parse().map_err(|_| ConfigError::Invalid(format!("{ENV_WORKERS}={v:?} is not a count")))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.queue_capacity == 0 {
            return Err(ConfigError::Invalid("queue_capacity must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_win() {
        let config = ServiceConfig::default()
            .with_overrides(|k| match k {
                ENV_WORKERS => Some("2".into()),
                ENV_LISTEN => Some("0.0.0.0:9000".into()),
                _ => None,
            })
            .unwrap();
        assert_eq!(config.workers, 2);
        assert_eq!(config.listen, "0.0.0.0:9000");
        assert!(ServiceConfig::default().with_overrides(|k| (k == ENV_WORKERS).then(|| "x".into())).is_err());
        assert!(ServiceConfig::default().with_overrides(|k| (k == ENV_WORKERS).then(|| "0".into())).is_err());
    }

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("service.json");
        std::fs::write(&path, r#"{"results_db": "r.db", "data_dir": "data", "workers": 2}"#).unwrap();
        let config = ServiceConfig::from_file(&path).unwrap();
        assert_eq!(config.results_db, dir.path().join("r.db"));
        assert_eq!(config.data_dir, Some(dir.path().join("data")));
        std::fs::write(&path, r#"{"colour": 1}"#).unwrap();
        assert!(matches!(ServiceConfig::from_file(&path), Err(ConfigError::Invalid(_))));
    }
}
