//! Error body shared by every endpoint: `{code, message, detail}`.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tableau_core::assist::AssistError;
use tableau_core::codegen::CodegenError;
use tableau_core::env::bundle::BundleError;
use tableau_core::judge::JudgeError;
use tableau_core::llm::{BridgeError, ProviderError};
use tableau_core::timeline::ArchiveError;
use tableau_core::{EnvError, TimelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    RevisionConflict,
    StaleProposal,
    ValidationFailed,
    ProviderError,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::RevisionConflict | ErrorCode::StaleProposal => StatusCode::CONFLICT,
            ErrorCode::ValidationFailed => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::ProviderError => StatusCode::BAD_GATEWAY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub detail: Value,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(ErrorCode::NotFound, format!("no {what} `{id}`"))
            .with_detail(json!({ "kind": what, "id": id }))
    }

    pub fn conflict(expected: u64, actual: u64) -> Self {
        ApiError::new(
            ErrorCode::RevisionConflict,
            format!("revision {expected} is stale; the session is at {actual}"),
        )
        .with_detail(json!({ "expected": expected, "actual": actual }))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::BadRequest, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::ValidationFailed, message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<TimelineError> for ApiError {
    fn from(e: TimelineError) -> Self {
        let detail = match &e {
            TimelineError::IndexOutOfRange { index, len } => json!({ "index": index, "len": len }),
            _ => Value::Null,
        };
        ApiError::validation(e.to_string()).with_detail(detail)
    }
}

impl From<EnvError> for ApiError {
    fn from(e: EnvError) -> Self {
        ApiError::validation(e.to_string())
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        ApiError::new(ErrorCode::ProviderError, e.to_string())
    }
}

impl From<BridgeError> for ApiError {
    fn from(e: BridgeError) -> Self {
        match e {
            BridgeError::Provider(p) => p.into(),
            BridgeError::Parse(p) => ApiError::validation(format!("model output rejected: {p}"))
                .with_detail(json!({ "kind": "parse" })),
        }
    }
}

impl From<AssistError> for ApiError {
    fn from(e: AssistError) -> Self {
        match e {
            AssistError::StaleProposal { proposed, current } => {
                ApiError::new(ErrorCode::StaleProposal, e.to_string())
                    .with_detail(json!({ "proposed": proposed, "current": current }))
            }
            AssistError::Timeline(t) => t.into(),
            AssistError::Bridge(b) => b.into(),
            other => ApiError::validation(other.to_string()),
        }
    }
}

impl From<CodegenError> for ApiError {
    fn from(e: CodegenError) -> Self {
        match e {
            CodegenError::Bridge(b) => b.into(),
            other => ApiError::validation(other.to_string()),
        }
    }
}

impl From<JudgeError> for ApiError {
    fn from(e: JudgeError) -> Self {
        ApiError::validation(e.to_string())
    }
}

impl From<ArchiveError> for ApiError {
    fn from(e: ArchiveError) -> Self {
        match e {
            ArchiveError::Document(d) => ApiError::bad_request(d.to_string()),
            other => ApiError::validation(other.to_string()),
        }
    }
}

impl From<BundleError> for ApiError {
    fn from(e: BundleError) -> Self {
        ApiError::new(ErrorCode::Internal, e.to_string())
    }
}
