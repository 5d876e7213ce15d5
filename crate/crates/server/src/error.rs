use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use raymeter_core::camera::CameraError;
use raymeter_core::project::ProjectError;
use raymeter_core::session::SessionError;
use serde::Serialize;

/// Error body of every failed request: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        let (status, code) = match &e {
            ProjectError::UnknownProject(_) => (StatusCode::NOT_FOUND, "unknown_project"),
            ProjectError::UnknownImage { .. } => (StatusCode::NOT_FOUND, "unknown_image"),
            ProjectError::DuplicateProject(_) => (StatusCode::CONFLICT, "duplicate_project"),
            ProjectError::InvalidManifest(_) => (StatusCode::BAD_REQUEST, "invalid_manifest"),
            ProjectError::MissingImage(_) => (StatusCode::BAD_REQUEST, "missing_image"),
            ProjectError::StorageUnavailable(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_unavailable"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::UnknownPoint(_) => (StatusCode::NOT_FOUND, "unknown_point"),
            SessionError::DuplicatePoint(_) => (StatusCode::CONFLICT, "duplicate_point"),
            SessionError::InvalidRay(_) => (StatusCode::BAD_REQUEST, "invalid_ray"),
            SessionError::IndexOutOfRange { .. } => (StatusCode::NOT_FOUND, "index_out_of_range"),
            SessionError::StorageUnavailable(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_unavailable"),
            SessionError::CorruptSession { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "corrupt_session"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<CameraError> for ApiError {
    fn from(e: CameraError) -> Self {
        let (status, code) = match &e {
            CameraError::PickOutOfBounds { .. } => (StatusCode::BAD_REQUEST, "pick_out_of_bounds"),
            CameraError::InvalidIntrinsics(_) | CameraError::InvalidPose(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "invalid_camera")
            }
            CameraError::Geometry(_) => (StatusCode::BAD_REQUEST, "invalid_ray"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}
