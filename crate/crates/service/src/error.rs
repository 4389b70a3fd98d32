use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use pics_core::PicsError;
use pics_io::IoError;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("no session '{0}'")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] PicsError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Io(IoError::Io { .. }) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Invalid(_) | ApiError::Engine(_) | ApiError::Io(_) => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not-found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Engine(PicsError::InvalidEdit(_)) => "invalid-edit",
            ApiError::Engine(PicsError::OutOfBounds { .. }) => "out-of-bounds",
            ApiError::Io(IoError::UnsupportedFormat(_)) => "unsupported-format",
            ApiError::Io(IoError::DimensionMismatch(_)) | ApiError::Engine(PicsError::DimensionMismatch(_)) => {
                "dimension-mismatch"
            }
            ApiError::Io(IoError::UnknownPreset(_)) => "unknown-preset",
            _ => "invalid",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.kind(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
