//! JSON API over a [`ReviewSession`], plus static hosting for the review
//! UI.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/queue/next` | next unreviewed example, or `{"done": true}` |
//! | GET | `/api/examples/{id}` | one example with its current verdict |
//! | POST | `/api/examples/{id}/verdict` | record a verdict |
//! | GET | `/api/progress` | counts |
//! | GET | `/api/export` | reviewed gold set as a dataset |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use spanshift::review::{Decision, Progress, ReviewError, ReviewExample, ReviewSession, ReviewVerdict};
use spanshift::Dataset;
use tower_http::services::ServeDir;

pub type SharedSession = Arc<RwLock<ReviewSession>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<ReviewExample>,
}

/// Body of `POST /api/examples/{id}/verdict`; the id comes from the path.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct VerdictRequest {
    pub decision: Decision,
    #[serde(default)]
    pub corrected_text: Option<String>,
    #[serde(default)]
    pub corrected_start: Option<usize>,
    #[serde(default)]
    pub reviewer: String,
    #[serde(default)]
    pub qa_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictAck {
    pub verdict: ReviewVerdict,
    pub progress: Progress,
}

pub struct ApiError(StatusCode, serde_json::Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let message = e.to_string();
        match e {
            ReviewError::NotFound(_) => ApiError(StatusCode::NOT_FOUND, json!({ "error": message })),
            ReviewError::InvalidSpan { start, expected, actual } => ApiError(
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "error": message, "start": start, "expected": expected, "actual": actual }),
            ),
            ReviewError::MissingCorrection => ApiError(StatusCode::BAD_REQUEST, json!({ "error": message })),
            _ => {
                log::error!("{message}");
                ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message }))
            }
        }
    }
}

fn read(session: &SharedSession) -> std::sync::RwLockReadGuard<'_, ReviewSession> {
    session.read().unwrap_or_else(|e| e.into_inner())
}

async fn next(State(session): State<SharedSession>) -> Json<QueueItem> {
    let example = read(&session).next_unreviewed();
    Json(QueueItem { done: example.is_none(), example })
}

async fn example(
    State(session): State<SharedSession>,
    Path(id): Path<String>,
) -> Result<Json<ReviewExample>, ApiError> {
    Ok(Json(read(&session).example(&id)?))
}

async fn verdict(
    State(session): State<SharedSession>,
    Path(id): Path<String>,
    Json(req): Json<VerdictRequest>,
) -> Result<Json<VerdictAck>, ApiError> {
    if let Some(body_id) = req.qa_id.as_ref().filter(|b| **b != id) {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            json!({ "error": format!("body qa_id {body_id:?} does not match path id {id:?}") }),
        ));
    }
    let v = ReviewVerdict {
        qa_id: id,
        decision: req.decision,
        corrected_text: req.corrected_text,
        corrected_start: req.corrected_start,
        reviewer: req.reviewer,
        timestamp: None,
    };
    let mut guard = session.write().unwrap_or_else(|e| e.into_inner());
    let verdict = guard.submit(v)?;
    Ok(Json(VerdictAck { verdict, progress: guard.progress() }))
}

async fn progress(State(session): State<SharedSession>) -> Json<Progress> {
    Json(read(&session).progress())
}

async fn export(State(session): State<SharedSession>) -> Json<Dataset> {
    Json(read(&session).export_gold())
}

/// API routes, with `static_dir` (if any) served for every other path.
pub fn router(session: SharedSession, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queue/next", get(next))
        .route("/api/examples/{id}", get(example))
        .route("/api/examples/{id}/verdict", post(verdict))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .with_state(session);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, session: ReviewSession, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(RwLock::new(session)), static_dir)).await
}
