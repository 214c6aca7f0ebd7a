use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clock::SystemClock;
use crate::history::Turn;

use super::{ApiConfig, Engine, ServiceError};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ServiceError::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            ServiceError::StorageFailure(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_failure"),
            ServiceError::Config(_) => (StatusCode::INTERNAL_SERVER_ERROR, "config"),
            ServiceError::Downstream(_) => (StatusCode::BAD_GATEWAY, "downstream"),
        };
        let body = json!({"error": {"kind": kind, "message": self.to_string()}});
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageBody {
    text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyBody {
    query: String,
    #[serde(default)]
    history: Vec<Turn>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendBody {
    #[serde(default)]
    diagnosis: Option<String>,
    query: String,
    #[serde(default)]
    history: Vec<Turn>,
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    created_ms: u64,
}

/// Parses the body ourselves so malformed JSON gets the same error shape as
/// every other failure.
fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::InvalidRequest(e.to_string()))
}

/// Engine calls block (retry sleeps, rayon fan-out), so they run off the
/// async workers.
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::StorageFailure(format!("worker failed: {e}")))?
}

async fn create_session(State(engine): State<Arc<Engine>>) -> Result<Response, ServiceError> {
    let s = blocking(move || engine.create_session()).await?;
    let body = Created {
        session_id: s.session_id,
        created_ms: s.created_ms,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn post_message(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Response, ServiceError> {
    let body: MessageBody = parse(&body)?;
    let r = blocking(move || engine.post_message(&id, &body.text)).await?;
    Ok(Json(r).into_response())
}

async fn get_session(
    State(engine): State<Arc<Engine>>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    let s = engine.get_session(&id)?;
    Ok(Json(&*s).into_response())
}

async fn classify(State(engine): State<Arc<Engine>>, body: axum::body::Bytes) -> Result<Response, ServiceError> {
    let body: ClassifyBody = parse(&body)?;
    let r = blocking(move || engine.classify(&body.query, &body.history)).await?;
    Ok(Json(r).into_response())
}

async fn recommend(State(engine): State<Arc<Engine>>, body: axum::body::Bytes) -> Result<Response, ServiceError> {
    let body: RecommendBody = parse(&body)?;
    let r = blocking(move || engine.recommend(body.diagnosis.as_deref(), &body.query, &body.history)).await?;
    Ok(Json(r).into_response())
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<super::HealthInfo> {
    Json(engine.health())
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/message", post(post_message))
        .route("/v1/classify", post(classify))
        .route("/v1/recommend", post(recommend))
        .route("/v1/health", get(health))
        .with_state(engine)
}

/// Binds `config.listen` and serves until Ctrl-C.
pub async fn serve(config: ApiConfig) -> Result<(), ServiceError> {
    let engine = Engine::from_config(&config, Arc::new(SystemClock))?;
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .map_err(|e| ServiceError::Config(format!("cannot bind {}: {e}", config.listen)))?;
    log::info!("listening on {}", config.listen);
    axum::serve(listener, router(Arc::new(engine)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
        .map_err(|e| ServiceError::StorageFailure(e.to_string()))
}
