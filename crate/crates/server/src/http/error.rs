//! Error bodies and the status mapping.

use axum::http::StatusCode;
use modelforge_core::{LoadCause, RepositoryError, ValidationReport};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), details: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn route_not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "ROUTE_NOT_FOUND", message)
    }

    pub fn body(&self) -> Value {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(details) = &self.details {
            body["details"] = details.clone();
        }
        body
    }
}

pub fn report_json(report: &ValidationReport) -> Value {
    Value::Array(
        report
            .violations
            .iter()
            .map(|v| {
                let mut entry = json!({ "code": v.code.as_str(), "objectPath": v.object_path.to_string() });
                if let Some(f) = &v.feature {
                    entry["feature"] = json!(f);
                }
                entry["message"] = json!(v.message);
                entry
            })
            .collect(),
    )
}

pub fn status_for(code: &str) -> StatusCode {
    match code {
        "VALUE_PARSE" | "ABSTRACT_CLASS" | "BAD_REQUEST" => StatusCode::BAD_REQUEST,
        "UNKNOWN_PACKAGE" | "UNKNOWN_CLASS" | "UNKNOWN_MODEL" | "UNKNOWN_FEATURE" | "UNKNOWN_CONTAINMENT" | "PARENT_NOT_FOUND"
        | "TARGET_NOT_FOUND" | "ROUTE_NOT_FOUND" => StatusCode::NOT_FOUND,
        "AMBIGUOUS_PARENT" | "AMBIGUOUS_CONTAINMENT" | "AMBIGUOUS_TARGET" | "AMBIGUOUS_REFERENCE" | "NO_CANDIDATE"
        | "NO_OPPOSITE_REFERENCE" | "ROOT_CLASS_MISMATCH" | "ROOT_DELETION_FORBIDDEN" | "MODEL_OFFLINE" => StatusCode::CONFLICT,
        "VALIDATION_REJECTED" => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<RepositoryError> for ApiError {
    fn from(e: RepositoryError) -> Self {
        let code = e.code();
        let details = match &e {
            RepositoryError::ValidationRejected(report) => Some(report_json(report)),
            RepositoryError::ModelOffline { cause: LoadCause::Invalid(report), .. } => Some(report_json(report)),
            RepositoryError::ModelOffline { cause, .. } => Some(json!({ "cause": cause.to_string() })),
            _ => None,
        };
        ApiError { status: status_for(code), code, message: e.to_string(), details }
    }
}
