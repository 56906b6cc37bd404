use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use easytime_core::evaluation::{EvalConfig, EvalRecord, Strategy};
use easytime_core::forecasters::{method_family, MethodSpec};
use easytime_core::pipeline::{DatasetMeta, FailedRun, RecordSink, SinkError};
use rusqlite::types::ValueRef;
use rusqlite::{params, Connection, ErrorCode, OpenFlags};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{SCHEMA_SQL, SCHEMA_VERSION, TABLES};
use crate::verify::VerifiedSql;

pub const QUERY_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("store unavailable: {0}")]
    Unavailable(String),
    #[error("store has schema version {found}, this build expects {expected}")]
    SchemaVersion { found: i64, expected: i64 },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("query exceeded {0:?}")]
    QueryTimeout(Duration),
    #[error("query failed: {0}")]
    Exec(String),
    #[error("i/o error: {0}")]
    Io(String),
}

fn exec_err(e: rusqlite::Error) -> StoreError {
    match e.sqlite_error_code() {
        Some(ErrorCode::ConstraintViolation) => StoreError::ConstraintViolation(e.to_string()),
        Some(ErrorCode::CannotOpen | ErrorCode::DatabaseBusy | ErrorCode::DatabaseLocked | ErrorCode::ReadOnly) => {
            StoreError::Unavailable(e.to_string())
        }
        _ => StoreError::Exec(e.to_string()),
    }
}

/// A cell of a query result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Rendering used in CSV exports and text answers.
    pub fn render(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Integer(i) => i.to_string(),
            Value::Real(r) => r.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<ValueRef<'_>> for Value {
    fn from(v: ValueRef<'_>) -> Self {
        match v {
            ValueRef::Null => Value::Null,
            ValueRef::Integer(i) => Value::Integer(i),
            ValueRef::Real(r) => Value::Real(r),
            ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Value::Text(hex::encode(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub dataset_id: String,
    pub name: String,
    pub domain: String,
    pub n_channels: usize,
    pub length: usize,
    pub frequency: Option<String>,
    pub seasonality: f64,
    pub trend: f64,
    pub transition: f64,
    pub shifting: f64,
    pub stationarity: f64,
    pub correlation: f64,
}

impl From<&DatasetMeta> for DatasetRow {
    fn from(m: &DatasetMeta) -> Self {
        let c = &m.characteristics;
        Self {
            dataset_id: m.dataset_id.clone(),
            name: m.name.clone(),
            domain: m.domain.clone(),
            n_channels: m.n_channels,
            length: m.length,
            frequency: m.frequency.clone(),
            seasonality: c.seasonality,
            trend: c.trend,
            transition: c.transition,
            shifting: c.shifting,
            stationarity: c.stationarity,
            correlation: c.correlation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method_id: String,
    pub name: String,
    pub family: String,
}

impl From<&MethodSpec> for MethodRow {
    fn from(spec: &MethodSpec) -> Self {
        let key = method_key(spec);
        Self { method_id: key.clone(), name: key, family: method_family(&spec.method_id).to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    pub dataset_id: String,
    pub method_id: String,
    pub strategy: Strategy,
    pub horizon: usize,
    pub lookback: usize,
    pub stride: usize,
    pub status: RunStatus,
    pub started_at: String,
    pub config_digest: String,
    pub n_windows: usize,
    pub runtime_ms: u64,
    pub error_message: Option<String>,
}

/// Store key of a method: its id, followed by its parameters when it has any.
pub fn method_key(spec: &MethodSpec) -> String {
    if spec.params.is_empty() {
        return spec.method_id.clone();
    }
    let params: Vec<String> = spec.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{}({})", spec.method_id, params.join(","))
}

/// Deterministic id of the run of `method_key` on `dataset_id` under a config.
pub fn run_id(dataset_id: &str, method_key: &str, config_digest: &str) -> String {
    let mut h = Sha256::new();
    for part in [dataset_id, method_key, config_digest] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..16])
}

fn strategy_from(s: &str) -> Strategy {
    if s == "rolling" {
        Strategy::Rolling
    } else {
        Strategy::Fixed
    }
}

/// Handle on one store file. Writes go through a single handle; readers
/// may open their own with [`Store::open_read_only`].
pub struct Store {
    conn: Connection,
    path: Option<PathBuf>,
    fixed_timestamp: Option<String>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("path", &self.path).finish()
    }
}

impl Store {
    /// Opens or creates the store at `path`. A file stamped with another
    /// schema version is refused.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let conn = Connection::open(path).map_err(|e| StoreError::Unavailable(format!("{}: {e}", path.display())))?;
        conn.pragma_update(None, "journal_mode", "WAL").map_err(exec_err)?;
        Self::init(conn, Some(path.to_path_buf()))
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        let conn = Connection::open_in_memory().map_err(|e| StoreError::Unavailable(e.to_string()))?;
        Self::init(conn, None)
    }

    /// Read-only handle on an existing store.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let flags = OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX | OpenFlags::SQLITE_OPEN_URI;
        let conn = Connection::open_with_flags(path, flags)
            .map_err(|e| StoreError::Unavailable(format!("{}: {e}", path.display())))?;
        let found = user_version(&conn)?;
        if found != SCHEMA_VERSION {
            return Err(StoreError::SchemaVersion { found, expected: SCHEMA_VERSION });
        }
        Ok(Self { conn, path: Some(path.to_path_buf()), fixed_timestamp: None })
    }

    fn init(conn: Connection, path: Option<PathBuf>) -> Result<Self, StoreError> {
        conn.pragma_update(None, "foreign_keys", "ON").map_err(exec_err)?;
        conn.busy_timeout(Duration::from_secs(5)).map_err(exec_err)?;
        let found = user_version(&conn)?;
        if found == 0 {
            let tables: i64 = conn
                .query_row("SELECT COUNT(*) FROM sqlite_master WHERE type = 'table'", [], |r| r.get(0))
                .map_err(exec_err)?;
            if tables != 0 {
                return Err(StoreError::SchemaVersion { found, expected: SCHEMA_VERSION });
            }
            let ddl = format!("BEGIN;\n{SCHEMA_SQL}\nPRAGMA user_version = {SCHEMA_VERSION};\nCOMMIT;");
            conn.execute_batch(&ddl).map_err(exec_err)?;
        } else if found != SCHEMA_VERSION {
            return Err(StoreError::SchemaVersion { found, expected: SCHEMA_VERSION });
        }
        Ok(Self { conn, path, fixed_timestamp: None })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Stamps every run written from now on with `timestamp` instead of the
    /// wall clock, which makes the file content reproducible.
    pub fn with_fixed_timestamp(mut self, timestamp: impl Into<String>) -> Self {
        self.fixed_timestamp = Some(timestamp.into());
        self
    }

    fn now(&self) -> String {
        self.fixed_timestamp.clone().unwrap_or_else(|| chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string())
    }

    pub fn insert_dataset(&self, row: &DatasetRow) -> Result<(), StoreError> {
        self.conn
            .execute(
                "INSERT INTO datasets (dataset_id, name, domain, n_channels, length, frequency, seasonality, trend,
                     transition, shifting, stationarity, correlation)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12)
                 ON CONFLICT (dataset_id) DO UPDATE SET name = excluded.name, domain = excluded.domain,
                     n_channels = excluded.n_channels, length = excluded.length, frequency = excluded.frequency,
                     seasonality = excluded.seasonality, trend = excluded.trend, transition = excluded.transition,
                     shifting = excluded.shifting, stationarity = excluded.stationarity,
                     correlation = excluded.correlation",
                params![
                    row.dataset_id,
                    row.name,
                    row.domain,
                    row.n_channels as i64,
                    row.length as i64,
                    row.frequency,
                    row.seasonality,
                    row.trend,
                    row.transition,
                    row.shifting,
                    row.stationarity,
                    row.correlation
                ],
            )
            .map_err(exec_err)?;
        Ok(())
    }

    pub fn insert_method(&self, row: &MethodRow) -> Result<(), StoreError> {
        self.conn
            .execute(
                "INSERT INTO methods (method_id, name, family) VALUES (?1, ?2, ?3)
                 ON CONFLICT (method_id) DO UPDATE SET name = excluded.name, family = excluded.family",
                params![row.method_id, row.name, row.family],
            )
            .map_err(exec_err)?;
        Ok(())
    }

    /// Upserts a run and replaces its scores, in one transaction.
    pub fn insert_run_with_scores(&mut self, run: &RunRow, scores: &[(String, f64)]) -> Result<(), StoreError> {
        let tx = self.conn.transaction().map_err(exec_err)?;
        tx.execute("DELETE FROM scores WHERE run_id = ?1", params![run.run_id]).map_err(exec_err)?;
        tx.execute(
            "INSERT INTO runs (run_id, dataset_id, method_id, strategy, horizon, lookback, stride, status, started_at,
                 config_digest, n_windows, runtime_ms, error_message)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13)
             ON CONFLICT (run_id) DO UPDATE SET dataset_id = excluded.dataset_id, method_id = excluded.method_id,
                 strategy = excluded.strategy, horizon = excluded.horizon, lookback = excluded.lookback,
                 stride = excluded.stride, status = excluded.status, started_at = excluded.started_at,
                 config_digest = excluded.config_digest, n_windows = excluded.n_windows,
                 runtime_ms = excluded.runtime_ms, error_message = excluded.error_message",
            params![
                run.run_id,
                run.dataset_id,
                run.method_id,
                run.strategy.as_str(),
                run.horizon as i64,
                run.lookback as i64,
                run.stride as i64,
                run.status.as_str(),
                run.started_at,
                run.config_digest,
                run.n_windows as i64,
                run.runtime_ms as i64,
                run.error_message
            ],
        )
        .map_err(exec_err)?;
        for (metric, value) in scores {
            tx.execute(
                "INSERT INTO scores (run_id, metric, value) VALUES (?1, ?2, ?3)",
                params![run.run_id, metric, value],
            )
            .map_err(exec_err)?;
        }
        tx.commit().map_err(exec_err)
    }

    /// Persists a successful evaluation; returns its run id.
    pub fn record_eval(
        &mut self,
        record: &EvalRecord,
        spec: &MethodSpec,
        config: &EvalConfig,
    ) -> Result<String, StoreError> {
        let key = method_key(spec);
        let run = RunRow {
            run_id: run_id(&record.dataset_id, &key, &record.config_digest),
            dataset_id: record.dataset_id.clone(),
            method_id: key,
            strategy: record.strategy,
            horizon: record.horizon,
            lookback: record.lookback,
            stride: record.stride,
            status: RunStatus::Ok,
            started_at: self.now(),
            config_digest: record.config_digest.clone(),
            n_windows: record.n_windows,
            runtime_ms: record.runtime_ms,
            error_message: None,
        };
        debug_assert_eq!(record.config_digest, config.digest());
        let scores: Vec<(String, f64)> = record.metric_values.iter().map(|(k, v)| (k.clone(), *v)).collect();
        self.insert_run_with_scores(&run, &scores)?;
        Ok(run.run_id)
    }

    pub fn record_failure(&mut self, failure: &FailedRun, config: &EvalConfig) -> Result<String, StoreError> {
        let key = method_key(&failure.method);
        let run = RunRow {
            run_id: run_id(&failure.dataset_id, &key, &failure.config_digest),
            dataset_id: failure.dataset_id.clone(),
            method_id: key,
            strategy: config.strategy,
            horizon: config.horizon,
            lookback: config.lookback,
            stride: config.stride(),
            status: RunStatus::Failed,
            started_at: self.now(),
            config_digest: failure.config_digest.clone(),
            n_windows: 0,
            runtime_ms: 0,
            error_message: Some(failure.error.clone()),
        };
        self.insert_run_with_scores(&run, &[])?;
        Ok(run.run_id)
    }

    pub fn datasets(&self) -> Result<Vec<DatasetRow>, StoreError> {
        self.dataset_rows("SELECT * FROM datasets ORDER BY dataset_id", params![])
    }

    pub fn dataset(&self, dataset_id: &str) -> Result<Option<DatasetRow>, StoreError> {
        Ok(self.dataset_rows("SELECT * FROM datasets WHERE dataset_id = ?1", params![dataset_id])?.pop())
    }

    fn dataset_rows(&self, sql: &str, p: &[&dyn rusqlite::ToSql]) -> Result<Vec<DatasetRow>, StoreError> {
        let mut stmt = self.conn.prepare(sql).map_err(exec_err)?;
        let rows = stmt
            .query_map(p, |r| {
                Ok(DatasetRow {
                    dataset_id: r.get(0)?,
                    name: r.get(1)?,
                    domain: r.get(2)?,
                    n_channels: r.get::<_, i64>(3)? as usize,
                    length: r.get::<_, i64>(4)? as usize,
                    frequency: r.get(5)?,
                    seasonality: r.get(6)?,
                    trend: r.get(7)?,
                    transition: r.get(8)?,
                    shifting: r.get(9)?,
                    stationarity: r.get(10)?,
                    correlation: r.get(11)?,
                })
            })
            .map_err(exec_err)?;
        rows.collect::<Result<_, _>>().map_err(exec_err)
    }

    pub fn methods(&self) -> Result<Vec<MethodRow>, StoreError> {
        let mut stmt =
            self.conn.prepare("SELECT method_id, name, family FROM methods ORDER BY method_id").map_err(exec_err)?;
        let rows = stmt
            .query_map([], |r| Ok(MethodRow { method_id: r.get(0)?, name: r.get(1)?, family: r.get(2)? }))
            .map_err(exec_err)?;
        rows.collect::<Result<_, _>>().map_err(exec_err)
    }

    pub fn runs(&self) -> Result<Vec<RunRow>, StoreError> {
        let mut stmt = self
            .conn
            .prepare(
                "SELECT run_id, dataset_id, method_id, strategy, horizon, lookback, stride, status, started_at,
                     config_digest, n_windows, runtime_ms, error_message
                 FROM runs ORDER BY dataset_id, method_id, run_id",
            )
            .map_err(exec_err)?;
        let rows = stmt
            .query_map([], |r| {
                Ok(RunRow {
                    run_id: r.get(0)?,
                    dataset_id: r.get(1)?,
                    method_id: r.get(2)?,
                    strategy: strategy_from(&r.get::<_, String>(3)?),
                    horizon: r.get::<_, i64>(4)? as usize,
                    lookback: r.get::<_, i64>(5)? as usize,
                    stride: r.get::<_, i64>(6)? as usize,
                    status: if r.get::<_, String>(7)? == "ok" { RunStatus::Ok } else { RunStatus::Failed },
                    started_at: r.get(8)?,
                    config_digest: r.get(9)?,
                    n_windows: r.get::<_, i64>(10)? as usize,
                    runtime_ms: r.get::<_, i64>(11)? as u64,
                    error_message: r.get(12)?,
                })
            })
            .map_err(exec_err)?;
        rows.collect::<Result<_, _>>().map_err(exec_err)
    }

    pub fn scores(&self, run_id: &str) -> Result<BTreeMap<String, f64>, StoreError> {
        let mut stmt = self.conn.prepare("SELECT metric, value FROM scores WHERE run_id = ?1").map_err(exec_err)?;
        let rows = stmt.query_map(params![run_id], |r| Ok((r.get(0)?, r.get(1)?))).map_err(exec_err)?;
        rows.collect::<Result<_, _>>().map_err(exec_err)
    }

    /// Every successful run, rebuilt from `runs` and `scores`.
    pub fn eval_records(&self) -> Result<Vec<EvalRecord>, StoreError> {
        let mut out = Vec::new();
        for run in self.runs()?.into_iter().filter(|r| r.status == RunStatus::Ok) {
            out.push(EvalRecord {
                metric_values: self.scores(&run.run_id)?,
                dataset_id: run.dataset_id,
                method_id: run.method_id,
                strategy: run.strategy,
                horizon: run.horizon,
                lookback: run.lookback,
                stride: run.stride,
                n_windows: run.n_windows,
                runtime_ms: run.runtime_ms,
                config_digest: run.config_digest,
            });
        }
        Ok(out)
    }

    fn table_rows(&self, table: &str) -> Result<QueryResult, StoreError> {
        let (_, cols) = TABLES.iter().find(|(t, _)| *t == table).expect("known table");
        let order = match table {
            "scores" => "run_id, metric",
            _ => cols[0],
        };
        self.query(&format!("SELECT {} FROM {table} ORDER BY {order}", cols.join(", ")))
    }

    /// Hex SHA-256 over every row of every table, in key order.
    pub fn content_digest(&self) -> Result<String, StoreError> {
        let mut h = Sha256::new();
        for (table, _) in TABLES {
            let result = self.table_rows(table)?;
            h.update(table.as_bytes());
            for row in result.rows {
                let mut line = String::new();
                for v in row {
                    let _ = write!(line, "{}\u{1f}", serde_json::to_string(&v).expect("value serializes"));
                }
                h.update(line.as_bytes());
                h.update(b"\n");
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Writes `<table>.csv` for every table into `dir`.
    pub fn export_csv(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, StoreError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| StoreError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (table, _) in TABLES {
            let result = self.table_rows(table)?;
            let path = dir.join(format!("{table}.csv"));
            let io = |e: csv::Error| StoreError::Io(format!("{}: {e}", path.display()));
            let mut w = csv::Writer::from_path(&path).map_err(io)?;
            w.write_record(&result.columns).map_err(io)?;
            for row in &result.rows {
                w.write_record(row.iter().map(Value::render)).map_err(io)?;
            }
            w.flush().map_err(|e| StoreError::Io(e.to_string()))?;
            written.push(path);
        }
        Ok(written)
    }

    fn query(&self, sql: &str) -> Result<QueryResult, StoreError> {
        let mut stmt = self.conn.prepare(sql).map_err(exec_err)?;
        let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
        let width = columns.len();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([]).map_err(exec_err)?;
        while let Some(row) = cursor.next().map_err(exec_err)? {
            let mut out = Vec::with_capacity(width);
            for i in 0..width {
                out.push(Value::from(row.get_ref(i).map_err(exec_err)?));
            }
            rows.push(out);
        }
        Ok(QueryResult { columns, rows })
    }

    /// Runs verified SQL read-only, aborting after [`QUERY_TIMEOUT`].
    pub fn execute_select(&self, sql: &VerifiedSql) -> Result<QueryResult, StoreError> {
        self.execute_select_with_timeout(sql, QUERY_TIMEOUT)
    }

    pub fn execute_select_with_timeout(&self, sql: &VerifiedSql, timeout: Duration) -> Result<QueryResult, StoreError> {
        self.conn.pragma_update(None, "query_only", "ON").map_err(exec_err)?;
        let started = Instant::now();
        self.conn.progress_handler(100, Some(move || started.elapsed() > timeout)).map_err(exec_err)?;
        let result = self.query(sql.as_str());
        self.conn.progress_handler(0, None::<fn() -> bool>).map_err(exec_err)?;
        self.conn.pragma_update(None, "query_only", "OFF").map_err(exec_err)?;
        match result {
            Err(StoreError::Exec(msg)) if started.elapsed() > timeout && msg.contains("interrupt") => {
                Err(StoreError::QueryTimeout(timeout))
            }
            other => other,
        }
    }

    pub fn count_runs(&self, status: RunStatus) -> Result<usize, StoreError> {
        self.conn
            .query_row("SELECT COUNT(*) FROM runs WHERE status = ?1", params![status.as_str()], |r| r.get::<_, i64>(0))
            .map(|n| n as usize)
            .map_err(exec_err)
    }

    pub fn run(&self, run_id: &str) -> Result<Option<RunRow>, StoreError> {
        Ok(self.runs()?.into_iter().find(|r| r.run_id == run_id))
    }
}

fn user_version(conn: &Connection) -> Result<i64, StoreError> {
    conn.pragma_query_value(None, "user_version", |r| r.get(0)).map_err(exec_err)
}

fn sink_err(e: StoreError) -> SinkError {
    SinkError(e.to_string())
}

impl RecordSink for Store {
    fn put_dataset(&mut self, meta: &DatasetMeta) -> Result<(), SinkError> {
        self.insert_dataset(&DatasetRow::from(meta)).map_err(sink_err)
    }

    fn put_method(&mut self, spec: &MethodSpec) -> Result<(), SinkError> {
        self.insert_method(&MethodRow::from(spec)).map_err(sink_err)
    }

    fn put_record(&mut self, record: &EvalRecord, spec: &MethodSpec, config: &EvalConfig) -> Result<(), SinkError> {
        self.record_eval(record, spec, config).map(|_| ()).map_err(sink_err)
    }

    fn put_failure(&mut self, failure: &FailedRun, config: &EvalConfig) -> Result<(), SinkError> {
        self.record_failure(failure, config).map(|_| ()).map_err(sink_err)
    }
}
