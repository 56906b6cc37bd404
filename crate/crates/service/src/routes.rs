use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use easytime_core::automl::{build_ensemble, evaluate_ensemble, recommend, AutomlError, DEFAULT_K};
use easytime_core::config::{validate_config, ConfigInvalid};
use easytime_core::csv_io::{parse_dataset_csv, CsvOptions};
use easytime_core::evaluation::{evaluate_detailed, EvalConfig, EvalRecord, Segment, WindowForecast};
use easytime_core::forecasters::{method_family, MethodSpec, EXTERNAL_PREFIX};
use easytime_core::metrics::Metric;
use easytime_core::pipeline::{dataset_meta, DatasetMeta, FailedRun};
use easytime_core::series::to_rows;
use easytime_core::Series;
use easytime_qa::{QaAnswer, SessionHistory};
use easytime_store::{verify_sql, DatasetRow, MethodRow, QueryResult, MAX_LIMIT};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{codes, ApiError};
use crate::jobs::{Job, JobFailure, JobKind, Progress};
use crate::state::{register, AppState};

type AppResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    let upload_limit = state.config.max_upload_bytes;
    Router::new()
        .route("/api/health", get(health))
        .route("/api/datasets", get(list_datasets).post(upload_dataset).layer(DefaultBodyLimit::max(upload_limit)))
        .route("/api/datasets/{id}", get(get_dataset))
        .route("/api/datasets/{id}/series", get(get_series))
        .route("/api/recommend", post(recommend_methods))
        .route("/api/evaluate", post(submit_evaluate))
        .route("/api/automl", post(submit_automl))
        .route("/api/jobs/{id}", get(get_job))
        .route("/api/methods", get(list_methods))
        .route("/api/qa", post(ask))
        .route("/api/results", get(results))
        .route("/api/config/validate", post(validate))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

/// JSON body whose failures come back as API errors.
pub struct JsonBody<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                ApiError::new(e.status(), codes::PAYLOAD_TOO_LARGE, e.body_text())
            } else {
                ApiError::bad_request(codes::INVALID_JSON, e.body_text())
            }
        })?;
        serde_json::from_slice(&bytes)
            .map(JsonBody)
            .map_err(|e| ApiError::bad_request(codes::INVALID_JSON, format!("invalid request body: {e}")))
    }
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> AppResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::validation(e.body_text()))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, codes::NOT_FOUND, "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, codes::METHOD_NOT_ALLOWED, "method not allowed on this endpoint")
}

async fn health(State(state): Shared) -> Json<Value> {
    let datasets = state.datasets.read().expect("dataset registry poisoned").len();
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "datasets": datasets,
        "queued_jobs": state.jobs.queued(),
        "translator": state.qa.has_translator(),
    }))
}

async fn list_datasets(State(state): Shared) -> Json<Vec<DatasetMeta>> {
    let datasets = state.datasets.read().expect("dataset registry poisoned");
    Json(datasets.values().map(|e| e.meta.clone()).collect())
}

async fn get_dataset(State(state): Shared, Path(id): Path<String>) -> AppResult<Json<DatasetMeta>> {
    state.dataset(&id).map(|(meta, _)| Json(meta)).ok_or_else(|| ApiError::unknown_dataset(&id))
}

fn valid_dataset_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(e.status(), codes::PAYLOAD_TOO_LARGE, e.body_text())
    } else {
        ApiError::validation(e.body_text())
    }
}

/// `multipart/form-data` with a `file` part (CSV) and optional
/// `dataset_id`, `domain` and `frequency` text parts. The id defaults to
/// the file name without extension.
async fn upload_dataset(
    State(state): Shared,
    multipart: Result<Multipart, MultipartRejection>,
) -> AppResult<Json<DatasetMeta>> {
    let mut multipart = multipart.map_err(|e| ApiError::validation(e.body_text()))?;
    let (mut file, mut file_name, mut id, mut domain, mut frequency) = (None, None, None, None, None);
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        match field.name().unwrap_or_default() {
            "file" => {
                file_name = field.file_name().map(str::to_string);
                file = Some(field.bytes().await.map_err(multipart_error)?);
            }
            name @ ("dataset_id" | "domain" | "frequency") => {
                let name = name.to_string();
                let text = field.text().await.map_err(multipart_error)?.trim().to_string();
                if text.is_empty() {
                    continue;
                }
                match name.as_str() {
                    "dataset_id" => id = Some(text),
                    "domain" => domain = Some(text),
                    _ => frequency = Some(text),
                }
            }
            other => return Err(ApiError::validation(format!("unexpected form field '{other}'"))),
        }
    }
    let file = file.ok_or_else(|| ApiError::validation("missing 'file' part"))?;
    let id = id
        .or_else(|| {
            file_name
                .as_deref()
                .map(|n| std::path::Path::new(n).file_stem().unwrap_or_default().to_string_lossy().into_owned())
        })
        .ok_or_else(|| ApiError::validation("missing 'dataset_id' and the file has no name"))?;
    if !valid_dataset_id(&id) {
        return Err(ApiError::validation(format!(
            "dataset id '{id}' must be 1-128 letters, digits, '-', '_' or '.', not starting with '.'"
        )));
    }
    let mut series: Series = parse_dataset_csv(&file, &id, &CsvOptions::default())
        .map_err(|e| ApiError::bad_request(codes::INVALID_CSV, e.to_string()))?;
    if let Some(d) = domain {
        series = series.with_domain(d);
    }
    if let Some(f) = frequency {
        series = series.with_frequency(f);
    }

    let state = Arc::clone(&state);
    run_blocking(move || {
        let mut datasets = state.datasets.write().expect("dataset registry poisoned");
        if datasets.contains_key(&id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                codes::DUPLICATE_DATASET,
                format!("dataset '{id}' already exists"),
            ));
        }
        if let Some(dir) = &state.config.data_dir {
            std::fs::write(dir.join(format!("{id}.csv")), &file)
                .map_err(|e| ApiError::internal(format!("cannot save dataset: {e}")))?;
        }
        let meta = dataset_meta(&series);
        state.store.lock().expect("store poisoned").insert_dataset(&DatasetRow::from(&meta))?;
        register(&mut datasets, series);
        Ok(Json(meta))
    })
    .await
}

async fn run_blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("handler failed: {e}")))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesQuery {
    from: Option<usize>,
    to: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SeriesWindow {
    dataset_id: String,
    length: usize,
    from: usize,
    to: usize,
    channels: Vec<String>,
    timestamps: Vec<String>,
    /// One row per time step, one column per channel.
    values: Vec<Vec<f64>>,
}

async fn get_series(
    State(state): Shared,
    Path(id): Path<String>,
    q: Result<Query<SeriesQuery>, QueryRejection>,
) -> AppResult<Json<SeriesWindow>> {
    let q = query(q)?;
    let (_, series) = state.dataset(&id).ok_or_else(|| ApiError::unknown_dataset(&id))?;
    let n = series.len();
    let from = q.from.unwrap_or(0);
    let to = q.to.unwrap_or(n).min(n);
    if from > to {
        return Err(ApiError::validation(format!(
            "from ({from}) must not exceed to ({to}); the series has {n} points"
        )));
    }
    let stamps = series.timestamps();
    Ok(Json(SeriesWindow {
        dataset_id: id,
        length: n,
        from,
        to,
        channels: series.channel_names().to_vec(),
        timestamps: (from..to).map(|i| stamps.format(i)).collect(),
        values: (from..to).map(|i| series.values().row(i).to_vec()).collect(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendRequest {
    dataset_id: String,
    #[serde(default = "default_k")]
    k: usize,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn invalid_k(k: usize, methods: usize) -> ApiError {
    ApiError::bad_request(codes::INVALID_K, format!("k = {k} is outside 1..={methods}"))
}

async fn recommend_methods(State(state): Shared, JsonBody(req): JsonBody<RecommendRequest>) -> AppResult<Json<Value>> {
    let (_, series) = state.dataset(&req.dataset_id).ok_or_else(|| ApiError::unknown_dataset(&req.dataset_id))?;
    let model = Arc::clone(&state.model);
    let k = req.k;
    let rec = run_blocking(move || {
        recommend(&model, &*series, k).map_err(|e| match e {
            AutomlError::InvalidK { k, methods } => invalid_k(k, methods),
            other => ApiError::validation(other.to_string()),
        })
    })
    .await?;
    Ok(Json(json!({
        "dataset_id": req.dataset_id,
        "k": rec.k,
        "top": rec.top(),
        "ranked": rec.ranked,
        "characteristics": rec.characteristics,
    })))
}

/// Checks `methods` and `config` with the run-config validator; issue
/// paths under `eval` are reported under `config`.
fn validate_job_inputs(methods: Option<Value>, config: Option<Value>) -> AppResult<(Vec<MethodSpec>, EvalConfig)> {
    let doc = json!({
        "datasets": ["request"],
        "methods": methods.unwrap_or_else(|| json!("all")),
        "eval": config.unwrap_or_else(|| json!({})),
    });
    let run = validate_config(&doc.to_string()).map_err(|ConfigInvalid { mut issues }| {
        for issue in &mut issues {
            if let Some(rest) = issue.path.strip_prefix("eval") {
                issue.path = format!("config{rest}");
            }
        }
        ApiError::validation(format!("invalid request ({} problem(s))", issues.len()))
            .with_details(json!({ "issues": issues }))
    })?;
    if let Some(m) = run.methods.iter().find(|m| m.method_id.starts_with(EXTERNAL_PREFIX)) {
        return Err(ApiError::validation(format!(
            "external methods cannot be run through the service: {}",
            m.method_id
        )));
    }
    Ok((run.methods, run.eval))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    dataset_id: String,
    methods: Option<Value>,
    config: Option<Value>,
}

fn accepted(job_id: String) -> Response {
    (StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response()
}

fn queue_full() -> ApiError {
    ApiError::new(StatusCode::SERVICE_UNAVAILABLE, codes::QUEUE_FULL, "too many pending jobs; retry later")
}

async fn submit_evaluate(State(state): Shared, JsonBody(req): JsonBody<EvaluateRequest>) -> AppResult<Response> {
    let (meta, series) = state.dataset(&req.dataset_id).ok_or_else(|| ApiError::unknown_dataset(&req.dataset_id))?;
    let (methods, config) = validate_job_inputs(req.methods, req.config)?;
    let shared = Arc::clone(&state);
    let work = Box::new(move |progress: &Progress| run_evaluate(&shared, &meta, &series, &methods, &config, progress));
    state.jobs.submit(JobKind::Evaluate, work).map(accepted).map_err(|_| queue_full())
}

#[derive(Debug, Serialize)]
struct WindowJson {
    origin: usize,
    values: Vec<Vec<f64>>,
}

fn windows_json(windows: &[WindowForecast<f64>]) -> Vec<WindowJson> {
    windows.iter().map(|w| WindowJson { origin: w.origin, values: to_rows(w.values.view()) }).collect()
}

fn persist(
    state: &AppState,
    meta: &DatasetMeta,
    records: &[(MethodSpec, EvalRecord)],
    failures: &[FailedRun],
    config: &EvalConfig,
) -> Result<Vec<String>, JobFailure> {
    let fail = |e: easytime_store::StoreError| JobFailure::new(codes::INTERNAL, format!("cannot save results: {e}"));
    let mut store = state.store.lock().expect("store poisoned");
    store.insert_dataset(&DatasetRow::from(meta)).map_err(fail)?;
    let mut run_ids = Vec::with_capacity(records.len());
    for (spec, record) in records {
        store.insert_method(&MethodRow::from(spec)).map_err(fail)?;
        run_ids.push(store.record_eval(record, spec, config).map_err(fail)?);
    }
    for f in failures {
        store.insert_method(&MethodRow::from(&f.method)).map_err(fail)?;
        store.record_failure(f, config).map_err(fail)?;
    }
    Ok(run_ids)
}

fn run_evaluate(
    state: &AppState,
    meta: &DatasetMeta,
    series: &Series,
    methods: &[MethodSpec],
    config: &EvalConfig,
    progress: &Progress,
) -> Result<Value, JobFailure> {
    let n = methods.len() as f64;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut forecasts = Vec::new();
    for (i, spec) in methods.iter().enumerate() {
        let mut report =
            |done: usize, planned: usize| progress.set((i as f64 + done as f64 / planned.max(1) as f64) / n);
        match evaluate_detailed(series, spec, config, Segment::Test, &mut report) {
            Ok(outcome) => {
                forecasts.push(json!({ "method_id": spec.method_id, "windows": windows_json(&outcome.windows) }));
                records.push((spec.clone(), outcome.record));
            }
            Err(e) => failures.push(FailedRun {
                dataset_id: meta.dataset_id.clone(),
                method: spec.clone(),
                config_digest: config.digest(),
                error: e.to_string(),
            }),
        }
        progress.set((i + 1) as f64 / n);
    }
    persist(state, meta, &records, &failures, config)?;
    if records.is_empty() {
        let reasons: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.method.method_id, f.error)).collect();
        return Err(JobFailure::new(codes::EVALUATION_FAILED, reasons.join("; ")));
    }
    let records: Vec<EvalRecord> = records.into_iter().map(|(_, r)| r).collect();
    Ok(json!({
        "dataset_id": meta.dataset_id,
        "config": config,
        "records": records,
        "failures": failures,
        "forecasts": forecasts,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutomlRequest {
    dataset_id: String,
    #[serde(default = "default_k")]
    k: usize,
    config: Option<Value>,
}

async fn submit_automl(State(state): Shared, JsonBody(req): JsonBody<AutomlRequest>) -> AppResult<Response> {
    let (meta, series) = state.dataset(&req.dataset_id).ok_or_else(|| ApiError::unknown_dataset(&req.dataset_id))?;
    let (_, config) = validate_job_inputs(None, req.config)?;
    let methods = state.model.n_methods();
    if req.k == 0 || req.k > methods {
        return Err(invalid_k(req.k, methods));
    }
    let shared = Arc::clone(&state);
    let k = req.k;
    let work = Box::new(move |progress: &Progress| run_automl(&shared, &meta, &series, k, &config, progress));
    state.jobs.submit(JobKind::Automl, work).map(accepted).map_err(|_| queue_full())
}

fn run_automl(
    state: &AppState,
    meta: &DatasetMeta,
    series: &Series,
    k: usize,
    config: &EvalConfig,
    progress: &Progress,
) -> Result<Value, JobFailure> {
    let failed = |e: String| JobFailure::new(codes::AUTOML_FAILED, e);
    progress.set(0.05);
    let ensemble = build_ensemble(series, &state.model, k, config).map_err(|e| failed(e.to_string()))?;
    progress.set(0.4);
    let outcome = evaluate_ensemble(series, &ensemble, config).map_err(|e| failed(e.to_string()))?;
    let members = ensemble.member_specs();
    let mut records = vec![(MethodSpec::new("ensemble").with_param("k", k as f64), outcome.record.clone())];
    let mut forecasts = vec![json!({ "method_id": "ensemble", "windows": windows_json(&outcome.windows) })];
    let mut failures = Vec::new();
    for (i, spec) in members.iter().enumerate() {
        match evaluate_detailed(series, spec, config, Segment::Test, &mut |_, _| {}) {
            Ok(o) => {
                forecasts.push(json!({ "method_id": spec.method_id, "windows": windows_json(&o.windows) }));
                records.push((spec.clone(), o.record));
            }
            Err(e) => failures.push(FailedRun {
                dataset_id: meta.dataset_id.clone(),
                method: spec.clone(),
                config_digest: config.digest(),
                error: e.to_string(),
            }),
        }
        progress.set(0.4 + 0.55 * (i + 1) as f64 / members.len() as f64);
    }
    persist(state, meta, &records, &failures, config)?;
    let weights: Vec<Value> = ensemble
        .members
        .iter()
        .zip(&ensemble.weights)
        .map(|(m, w)| json!({ "method_id": m.spec.method_id, "weight": w }))
        .collect();
    let member_records: Vec<&EvalRecord> = records[1..].iter().map(|(_, r)| r).collect();
    Ok(json!({
        "dataset_id": meta.dataset_id,
        "k": k,
        "config": config,
        "recommendation": ensemble.recommendation,
        "members": weights,
        "validation_loss": ensemble.validation_loss,
        "member_validation": ensemble.member_validation,
        "warnings": ensemble.warnings,
        "ensemble": outcome.record,
        "member_records": member_records,
        "failures": failures,
        "forecasts": forecasts,
    }))
}

async fn get_job(State(state): Shared, Path(id): Path<String>) -> AppResult<Json<Job>> {
    state
        .jobs
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, codes::UNKNOWN_JOB, format!("no job with id '{id}'")))
}

async fn list_methods() -> Json<Value> {
    let methods: Vec<Value> = MethodSpec::all_builtin()
        .into_iter()
        .map(|m| json!({ "method_id": m.method_id, "family": method_family(&m.method_id), "params": m.params }))
        .collect();
    Json(Value::Array(methods))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QaRequest {
    question: String,
    session_id: Option<String>,
}

#[derive(Debug, Serialize)]
struct QaResponse {
    session_id: String,
    #[serde(flatten)]
    answer: QaAnswer,
}

async fn ask(State(state): Shared, JsonBody(req): JsonBody<QaRequest>) -> AppResult<Json<QaResponse>> {
    let question = req.question.trim().to_string();
    if question.is_empty() {
        return Err(ApiError::validation("question must not be empty"));
    }
    let session_id =
        req.session_id.filter(|s| !s.is_empty()).unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    run_blocking(move || {
        let history = state
            .sessions
            .lock()
            .expect("sessions poisoned")
            .get(&session_id)
            .map(|s| s.turns().to_vec())
            .unwrap_or_default();
        let plan = state.qa.plan(&question, &history);
        let answer = state.qa.execute(&question, plan, &state.store.lock().expect("store poisoned"));
        let mut sessions = state.sessions.lock().expect("sessions poisoned");
        let session = sessions.entry(session_id.clone()).or_insert_with(|| SessionHistory::new(session_id.clone()));
        session.push(easytime_qa::Turn { question, answer: answer.clone() });
        Ok(Json(QaResponse { session_id, answer }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultsQuery {
    dataset_id: Option<String>,
    method_id: Option<String>,
    metric: Option<String>,
}

#[derive(Debug, Serialize)]
struct ResultsResponse {
    sql: String,
    #[serde(flatten)]
    result: QueryResult,
}

fn quoted(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Select statement over stored scores, filtered by the given fields.
pub fn results_sql(dataset_id: Option<&str>, method_id: Option<&str>, metric: Option<Metric>) -> String {
    let mut sql = String::from(
        "SELECT r.dataset_id, r.method_id, r.strategy, r.horizon, s.metric, s.value \
         FROM runs r JOIN scores s ON s.run_id = r.run_id WHERE r.status = 'ok'",
    );
    if let Some(d) = dataset_id {
        sql.push_str(&format!(" AND r.dataset_id = {}", quoted(d)));
    }
    if let Some(m) = method_id {
        sql.push_str(&format!(" AND r.method_id = {}", quoted(m)));
    }
    if let Some(m) = metric {
        sql.push_str(&format!(" AND s.metric = '{}'", m.name()));
    }
    sql.push_str(&format!(" ORDER BY r.dataset_id, r.method_id, r.horizon, s.metric LIMIT {MAX_LIMIT}"));
    sql
}

async fn results(
    State(state): Shared,
    q: Result<Query<ResultsQuery>, QueryRejection>,
) -> AppResult<Json<ResultsResponse>> {
    let q = query(q)?;
    let metric = q
        .metric
        .as_deref()
        .map(|m| {
            serde_json::from_value::<Metric>(Value::String(m.to_ascii_lowercase()))
                .map_err(|_| ApiError::validation(format!("unknown metric '{m}'")))
        })
        .transpose()?;
    let sql = results_sql(q.dataset_id.as_deref(), q.method_id.as_deref(), metric);
    let verified = verify_sql(&sql).into_verified().map_err(|v| ApiError::internal(v.summary()))?;
    run_blocking(move || {
        let result = state.store.lock().expect("store poisoned").execute_select(&verified)?;
        Ok(Json(ResultsResponse { sql, result }))
    })
    .await
}

async fn validate(JsonBody(doc): JsonBody<Value>) -> AppResult<Json<Value>> {
    match validate_config(&doc.to_string()) {
        Ok(config) => Ok(Json(json!({ "valid": true, "config": config }))),
        Err(ConfigInvalid { issues }) => {
            Err(ApiError::validation(format!("invalid configuration ({} problem(s))", issues.len()))
                .with_details(json!({ "issues": issues })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_sql_verifies_for_hostile_filters() {
        for id in ["ETTh1", "x' OR '1'='1", "a;DROP TABLE runs", "--"] {
            let sql = results_sql(Some(id), Some(id), Some(Metric::Mase));
            assert!(verify_sql(&sql).ok, "{sql}");
        }
    }

    #[test]
    fn dataset_ids() {
        assert!(valid_dataset_id("ETTh1-like_v2.0"));
        for bad in ["", ".hidden", "a/b", "..", "a b"] {
            assert!(!valid_dataset_id(bad), "{bad}");
        }
    }
}
