use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use serde_json::Value;

/// Error codes a client can receive.
pub mod codes {
    pub const INVALID_JSON: &str = "invalid_json";
    pub const VALIDATION_FAILED: &str = "validation_failed";
    pub const INVALID_CSV: &str = "invalid_csv";
    pub const INVALID_K: &str = "invalid_k";
    pub const NOT_FOUND: &str = "not_found";
    pub const UNKNOWN_DATASET: &str = "unknown_dataset";
    pub const UNKNOWN_JOB: &str = "unknown_job";
    pub const METHOD_NOT_ALLOWED: &str = "method_not_allowed";
    pub const DUPLICATE_DATASET: &str = "duplicate_dataset";
    pub const PAYLOAD_TOO_LARGE: &str = "payload_too_large";
    pub const QUEUE_FULL: &str = "queue_full";
    pub const INTERNAL: &str = "internal";
    pub const EVALUATION_FAILED: &str = "evaluation_failed";
    pub const AUTOML_FAILED: &str = "automl_failed";

    pub const ALL: [&str; 14] = [
        INVALID_JSON,
        VALIDATION_FAILED,
        INVALID_CSV,
        INVALID_K,
        NOT_FOUND,
        UNKNOWN_DATASET,
        UNKNOWN_JOB,
        METHOD_NOT_ALLOWED,
        DUPLICATE_DATASET,
        PAYLOAD_TOO_LARGE,
        QUEUE_FULL,
        INTERNAL,
        EVALUATION_FAILED,
        AUTOML_FAILED,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

/// An error response: `{"error": {code, message, details}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code, message: message.into(), details: None } }
    }

    pub fn with_details(mut self, details: impl Serialize) -> Self {
        self.body.details = serde_json::to_value(details).ok();
        self
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::bad_request(codes::VALIDATION_FAILED, message)
    }

    pub fn unknown_dataset(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, codes::UNKNOWN_DATASET, format!("no dataset with id '{id}'"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, codes::INTERNAL, message)
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            codes::PAYLOAD_TOO_LARGE,
            format!("request body exceeds {limit} bytes"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(serde_json::json!({ "error": self.body }))).into_response()
    }
}

impl From<easytime_store::StoreError> for ApiError {
    fn from(e: easytime_store::StoreError) -> Self {
        Self::internal(e.to_string())
    }
}
