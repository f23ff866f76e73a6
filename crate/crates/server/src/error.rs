//! Mapping of engine errors onto HTTP responses.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use hypotree_core::dataset::IngestError;
use hypotree_core::generation::GenerationError;
use hypotree_core::model::TreeError;
use hypotree_core::persistence::StoreError;
use hypotree_core::session::SessionError;
use hypotree_core::CorruptLog;
use serde_json::json;

/// An error response: `{"error": code, "message": text}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn busy(session: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "BusySession",
            format!("a generation is already running for session {session}"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
            StoreError::SessionExists(_) => (StatusCode::CONFLICT, "SessionExists"),
            StoreError::InvalidSessionId(_) => (StatusCode::BAD_REQUEST, "InvalidSessionId"),
            StoreError::Locked(_) => (StatusCode::CONFLICT, "SessionLocked"),
            StoreError::SequenceGap { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "SequenceGap"),
            StoreError::StorageFull => (StatusCode::INSUFFICIENT_STORAGE, "StorageFull"),
            StoreError::PermissionDenied(_) => (StatusCode::INTERNAL_SERVER_ERROR, "PermissionDenied"),
            StoreError::CorruptLog(_) => (StatusCode::INTERNAL_SERVER_ERROR, "CorruptLog"),
            StoreError::InvalidDiagram(_) => (StatusCode::INTERNAL_SERVER_ERROR, "InvalidDiagram"),
            StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Io"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<CorruptLog> for ApiError {
    fn from(e: CorruptLog) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "CorruptLog", e.to_string())
    }
}

impl From<TreeError> for ApiError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::UnknownNode(_) => Self::new(StatusCode::NOT_FOUND, "UnknownNode", e.to_string()),
            TreeError::RootNotBookmarkable => Self::bad_request("RootNotBookmarkable", e.to_string()),
            TreeError::EmptyDrafts => Self::new(StatusCode::BAD_GATEWAY, "EmptyDrafts", e.to_string()),
            TreeError::DuplicateNode(_) | TreeError::Invalid(_) => Self::internal(e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Tree(t) => t.into(),
            SessionError::RootNotBranchable => Self::bad_request(
                "RootNotBranchable",
                "the intent node cannot be branched; use regenerate to replace its five hypotheses",
            ),
            SessionError::EmptyIntent => Self::bad_request("EmptyIntent", e.to_string()),
            SessionError::WrongDraftCount { .. } => {
                Self::new(StatusCode::BAD_GATEWAY, "WrongCardinality", e.to_string())
            }
        }
    }
}

impl From<GenerationError> for ApiError {
    fn from(e: GenerationError) -> Self {
        let code = match &e {
            GenerationError::MalformedResponse(_) => "MalformedResponse",
            GenerationError::WrongCardinality { .. } => "WrongCardinality",
            GenerationError::ProviderUnavailable(_) => "ProviderUnavailable",
            GenerationError::AuthMissing(_) => "AuthMissing",
            GenerationError::Timeout(_) => "Timeout",
            GenerationError::RootNotBranchablePromptless => {
                return Self::bad_request("RootNotBranchable", e.to_string())
            }
            GenerationError::InvalidConfig(_) => return Self::internal(e.to_string()),
        };
        Self::new(StatusCode::BAD_GATEWAY, code, e.to_string())
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let code = match &e {
            IngestError::EmptyFile => "EmptyFile",
            IngestError::RaggedRows { .. } => "RaggedRows",
            IngestError::DuplicateHeader(_) => "DuplicateHeader",
            IngestError::Malformed(_) => "Malformed",
        };
        Self::bad_request(code, e.to_string())
    }
}
