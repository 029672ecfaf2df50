//! HTTP front end for an [`Engine`].
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | POST | `/v1/contents:tag` | content | report entry |
//! | GET | `/v1/contents/{id}/candidates` | | candidate set |
//! | GET | `/v1/tags/{id}` | | tag |
//! | POST | `/v1/confidence` | `{"content", "tag"}` | `{"content", "tag", "confidence"}` |
//! | GET | `/v1/healthz` | | `{"status", "contents", "tags"}` |
//!
//! Errors are `{"error": "..."}` with 400 for invalid input, 404 for unknown
//! ids, 409 for duplicates and 503 when a backend is unavailable.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::engine::Engine;
use crate::error::Error;
use crate::types::{Content, ContentId, TagId};

pub struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(status_for(&e), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::InvalidInput(_)
        | Error::InvalidEdge(_)
        | Error::InvalidRecord { .. }
        | Error::Parse { .. }
        | Error::CorruptSnapshot { .. } => StatusCode::BAD_REQUEST,
        Error::UnknownVertex { .. } => StatusCode::NOT_FOUND,
        Error::DuplicateVertex { .. } | Error::DuplicateTagName { .. } => StatusCode::CONFLICT,
        Error::BackendUnavailable(_) | Error::ScoreUnavailable(_) | Error::Config(_) => {
            StatusCode::SERVICE_UNAVAILABLE
        }
        Error::UnsupportedBackend(_) => StatusCode::NOT_IMPLEMENTED,
        Error::GenerationFailed(_) => StatusCode::BAD_GATEWAY,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("invalid body: {e}")))
}

/// Runs blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(
    engine: &Arc<Engine>,
    f: impl FnOnce(&Engine) -> crate::Result<T> + Send + 'static,
) -> ApiResult<T> {
    let engine = Arc::clone(engine);
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfidenceRequest {
    content: Content,
    tag: TagId,
}

#[derive(Serialize)]
struct ConfidenceResponse {
    content: ContentId,
    tag: TagId,
    confidence: f64,
}

async fn tag_content(State(engine): State<Arc<Engine>>, body: Bytes) -> Response {
    let content: Content = match parse_body(&body) {
        Ok(c) => c,
        Err(e) => return e.into_response(),
    };
    blocking(&engine, move |e| e.tag_content(content))
        .await
        .into_response()
}

async fn candidates(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Response {
    let id = match ContentId::new(id) {
        Ok(id) => id,
        Err(e) => return ApiError::from(e).into_response(),
    };
    blocking(&engine, move |e| e.candidates(&id))
        .await
        .into_response()
}

async fn tag(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Response {
    let id = match TagId::new(id) {
        Ok(id) => id,
        Err(e) => return ApiError::from(e).into_response(),
    };
    blocking(&engine, move |e| e.tag(&id)).await.into_response()
}

async fn confidence(State(engine): State<Arc<Engine>>, body: Bytes) -> Response {
    let req: ConfidenceRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(&engine, move |e| {
        let confidence = e.confidence(&req.content, &req.tag)?;
        Ok(ConfidenceResponse {
            content: req.content.id,
            tag: req.tag,
            confidence,
        })
    })
    .await
    .into_response()
}

async fn healthz(State(engine): State<Arc<Engine>>) -> Json<serde_json::Value> {
    let g = engine.graph();
    Json(json!({
        "status": "ok",
        "contents": g.content_count(),
        "tags": g.tag_count(),
    }))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/contents:tag", post(tag_content))
        .route("/v1/contents/{id}/candidates", get(candidates))
        .route("/v1/tags/{id}", get(tag))
        .route("/v1/confidence", post(confidence))
        .route("/v1/healthz", get(healthz))
        .with_state(engine)
}

/// Serves until the listener fails or `shutdown` resolves.
pub async fn serve(
    engine: Arc<Engine>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(shutdown)
        .await
}
