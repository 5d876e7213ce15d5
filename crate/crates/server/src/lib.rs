//! HTTP/JSON service for projects, images and measurement sessions.
//!
//! All geometry happens here: clients post pixel picks, the server turns
//! them into rays with the stored camera of the picked image and returns
//! the recomputed point. Routes live under `/api`; anything else falls
//! through to the static UI directory when one is configured.

mod error;
pub mod views;

use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use raymeter_core::camera::PixelPick;
use raymeter_core::formats::session_csv_string;
use raymeter_core::project::{Project, ProjectStore};
use raymeter_core::session::{PointStatus, SessionDocument, SessionStore};
use raymeter_core::SystemMode;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower::ServiceExt;
use tower_http::services::{ServeDir, ServeFile};

pub use error::ApiError;
use views::{PointView, SessionSummary, SessionView};

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug)]
pub struct AppState {
    pub projects: ProjectStore,
    pub sessions: SessionStore,
}

impl AppState {
    /// Opens the stores under `data_dir`, creating `projects/` and
    /// `sessions/` when missing.
    pub fn open(data_dir: &Path) -> Result<Self, String> {
        Ok(Self {
            projects: ProjectStore::open(data_dir).map_err(|e| e.to_string())?,
            sessions: SessionStore::open(data_dir).map_err(|e| e.to_string())?,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub ui_dir: Option<PathBuf>,
}

pub fn router(state: Arc<AppState>, config: &ServerConfig) -> Router {
    let api = Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/images/{image_id}", get(get_image))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/export", get(export_session))
        .route("/sessions/{id}/points", post(add_point))
        .route("/sessions/{id}/points/{pid}", get(get_point).patch(rename_point))
        .route("/sessions/{id}/points/{pid}/picks", post(add_pick))
        .route("/sessions/{id}/points/{pid}/picks/{index}", delete(remove_pick))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state);

    let mut app = Router::new().nest("/api", api);
    if let Some(ui) = &config.ui_dir {
        let index = ServeFile::new(ui.join("index.html"));
        app = app.fallback_service(ServeDir::new(ui).fallback(index));
    }
    app.layer(middleware::from_fn(log_request))
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let uri = req.uri().clone();
    let start = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        "{method} {uri} {} {:.1}ms",
        resp.status().as_u16(),
        start.elapsed().as_secs_f64() * 1e3
    );
    resp
}

/// Serves until `shutdown` resolves, then writes every cached session.
pub async fn run(
    listener: TcpListener,
    state: Arc<AppState>,
    config: ServerConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state.clone(), &config);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    let flushed = state
        .sessions
        .flush_all()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    tracing::info!("flushed {flushed} sessions");
    Ok(())
}

async fn list_projects(State(st): State<Arc<AppState>>) -> Json<Vec<Project>> {
    Json(st.projects.list())
}

async fn create_project(
    State(st): State<Arc<AppState>>,
    body: Result<Json<Project>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Project>)> {
    let Json(project) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_manifest", e.body_text()))?;
    Ok((StatusCode::CREATED, Json(st.projects.create(project)?)))
}

async fn get_project(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Project>> {
    Ok(Json(st.projects.get(&id)?))
}

async fn get_image(
    State(st): State<Arc<AppState>>,
    UrlPath((id, image_id)): UrlPath<(String, String)>,
    req: Request,
) -> ApiResult<Response> {
    let path = st.projects.image_path(&id, &image_id)?;
    if !path.is_file() {
        return Err(ApiError::not_found(format!("image file for {image_id} is missing")));
    }
    let resp = ServeFile::new(path).oneshot(req).await.expect("infallible");
    Ok(resp.into_response())
}

async fn list_sessions(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<SessionSummary>>> {
    let mut out = Vec::new();
    for id in st.sessions.list_ids()? {
        out.push(SessionSummary::from(&st.sessions.get(&id)?));
    }
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct NewSession {
    project_id: String,
    #[serde(default)]
    name: String,
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    body: Result<Json<NewSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let Json(req) = body?;
    st.projects.get(&req.project_id)?;
    let session = st.sessions.create(&req.project_id, &req.name)?;
    Ok((StatusCode::CREATED, Json(SessionView::from(&session))))
}

async fn get_session(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(SessionView::from(&st.sessions.get(&id)?)))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export_session(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let format = q.format.as_deref().unwrap_or("json");
    if format != "csv" && format != "json" {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "unknown_format",
            format!("unknown export format {format:?}, expected csv or json"),
        ));
    }
    let session = st.sessions.get(&id)?;
    let (body, content_type) = match format {
        "csv" => (session_csv_string(&session), "text/csv; charset=utf-8"),
        _ => (SessionDocument::seal(session).to_json(), "application/json"),
    };
    let disposition = format!("attachment; filename=\"session-{id}.{format}\"");
    Ok((
        [(header::CONTENT_TYPE, content_type.to_string()), (header::CONTENT_DISPOSITION, disposition)],
        body,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct NewPoint {
    id: Option<String>,
    #[serde(default)]
    label: String,
    #[serde(default)]
    mode: SystemMode,
}

async fn add_point(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<NewPoint>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<PointView>)> {
    let Json(req) = body?;
    let view = st
        .sessions
        .mutate(&id, |s| s.add_point(req.id, req.label, req.mode).map(PointView::from))?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_point(
    State(st): State<Arc<AppState>>,
    UrlPath((id, pid)): UrlPath<(String, String)>,
) -> ApiResult<Json<PointView>> {
    Ok(Json(PointView::from(st.sessions.get(&id)?.point(&pid)?)))
}

#[derive(Debug, Deserialize)]
struct Rename {
    label: String,
}

async fn rename_point(
    State(st): State<Arc<AppState>>,
    UrlPath((id, pid)): UrlPath<(String, String)>,
    body: Result<Json<Rename>, JsonRejection>,
) -> ApiResult<Json<PointView>> {
    let Json(req) = body?;
    let view = st
        .sessions
        .mutate(&id, |s| s.rename_point(&pid, req.label).map(PointView::from))?;
    Ok(Json(view))
}

/// A degenerate point is still returned in full, with the error fields
/// alongside.
#[derive(Debug, Serialize)]
struct DegenerateBody {
    code: &'static str,
    message: String,
    #[serde(flatten)]
    point: PointView,
}

fn point_response(view: PointView) -> Response {
    if view.status == PointStatus::Degenerate {
        let body = DegenerateBody {
            code: "degenerate_geometry",
            message: format!("the {} rays of point {} do not define a point", view.n_rays, view.id),
            point: view,
        };
        (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response()
    } else {
        Json(view).into_response()
    }
}

async fn add_pick(
    State(st): State<Arc<AppState>>,
    UrlPath((id, pid)): UrlPath<(String, String)>,
    body: Result<Json<PixelPick>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(pick) = body?;
    let session = st.sessions.get(&id)?;
    session.point(&pid)?;
    let project = st.projects.get(&session.project_id)?;
    let image = project
        .image(&pick.image_id)
        .ok_or_else(|| raymeter_core::project::ProjectError::UnknownImage {
            project_id: project.id.clone(),
            image_id: pick.image_id.clone(),
        })?;
    let ray = image.camera().ray_from_pixel(&pick)?;
    let view = st
        .sessions
        .mutate(&id, |s| s.add_ray(&pid, ray, Some(pick)).map(PointView::from))?;
    Ok(point_response(view))
}

async fn remove_pick(
    State(st): State<Arc<AppState>>,
    UrlPath((id, pid, index)): UrlPath<(String, String, String)>,
) -> ApiResult<Response> {
    let index: usize = index
        .parse()
        .map_err(|_| ApiError::bad_request(format!("pick index {index:?} is not a non-negative integer")))?;
    let view = st
        .sessions
        .mutate(&id, |s| s.remove_ray(&pid, index).map(PointView::from))?;
    Ok(point_response(view))
}
