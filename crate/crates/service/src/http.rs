//! JSON HTTP API over [`ServiceState`].

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::error::ServiceError;
use crate::state::ServiceState;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) | ServiceError::NoRoundsYet => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) | ServiceError::Busy | ServiceError::EmptyPool | ServiceError::PoolExhausted => {
                StatusCode::CONFLICT
            }
            ServiceError::Taxonomy { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Ingest { .. } | ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.code(), "detail": self.to_string() }))).into_response()
    }
}

type AppState = Arc<ServiceState>;
type ApiResult<T> = Result<T, ServiceError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/corpus", post(ingest))
        .route("/tasks", get(tasks))
        .route("/tasks/{id}/labels", post(submit))
        .route("/train", post(train))
        .route("/train/status", get(train_status))
        .route("/metrics", get(metrics))
        .route("/curve", get(curve))
        .route("/taxonomy", get(taxonomy))
        .route("/pool", get(pool))
        .with_state(state)
}

/// Body is corpus JSONL.
async fn ingest(State(s): State<AppState>, body: String) -> ApiResult<impl IntoResponse> {
    let delta = tokio::task::spawn_blocking(move || s.ingest_reader(body.as_bytes()))
        .await
        .map_err(|e| ServiceError::Store(e.to_string()))??;
    Ok(Json(delta))
}

#[derive(Deserialize)]
struct TasksQuery {
    n: Option<usize>,
    annotator: Option<String>,
}

async fn tasks(State(s): State<AppState>, Query(q): Query<TasksQuery>) -> ApiResult<impl IntoResponse> {
    let annotator = q.annotator.unwrap_or_else(|| "anonymous".into());
    Ok(Json(s.queue_next(q.n.unwrap_or(10), &annotator)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelBody {
    #[serde(default)]
    aspects: Vec<String>,
    #[serde(default)]
    sentiment: Vec<String>,
    annotator: String,
}

async fn submit(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<LabelBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(b) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    Ok(Json(s.submit_labels(&id, &b.aspects, &b.sentiment, &b.annotator)?))
}

async fn train(State(s): State<AppState>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::ACCEPTED, Json(s.trigger_retrain()?)))
}

async fn train_status(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.train_status())
}

async fn metrics(State(s): State<AppState>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.get_metrics()?))
}

#[derive(Deserialize)]
struct CurveQuery {
    format: Option<String>,
}

async fn curve(State(s): State<AppState>, Query(q): Query<CurveQuery>) -> ApiResult<Response> {
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(Json(s.get_curve()?).into_response()),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv")], s.get_curve_csv()?).into_response()),
        other => Err(ServiceError::BadRequest(format!("unknown format {other:?}; use json or csv"))),
    }
}

async fn taxonomy(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.config().taxonomy)
}

async fn pool(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.counts())
}

/// Serves until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
