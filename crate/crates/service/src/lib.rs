//! JSON HTTP API: search, scenario lookup and status.
//!
//! The collection is loaded in the background after the listener is up;
//! until then `/api/status` reports `loading` and queries get 503.

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use genius_core::embed::{EmbedError, Embedder};
use genius_core::retrieve::{search, QueryResult, SearchError, DEFAULT_RESULT_COUNT};
use genius_core::store::{Collection, RecordMetadata, SharedCollection};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::set_header::SetResponseHeaderLayer;

/// Origins allowed by default: the UI dev server.
pub const DEFAULT_CORS_ORIGINS: [&str; 2] = ["http://localhost:5173", "http://127.0.0.1:5173"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceState {
    Ok,
    Degraded,
    Loading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceStatus {
    pub state: ServiceState,
    pub collection_name: String,
    pub record_count: usize,
    pub embedder_id: String,
    pub uptime_s: f64,
}

/// Scenario detail returned by `/api/scenario/{id}`; the vector is omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioView {
    pub id: String,
    pub description: String,
    pub metadata: RecordMetadata,
    pub link: String,
}

/// Shared state behind every handler.
pub struct AppState {
    embedder: Arc<dyn Embedder>,
    collection: OnceLock<SharedCollection>,
    load_error: OnceLock<String>,
    started: Instant,
}

impl AppState {
    pub fn new(embedder: Arc<dyn Embedder>) -> Arc<Self> {
        Arc::new(Self {
            embedder,
            collection: OnceLock::new(),
            load_error: OnceLock::new(),
            started: Instant::now(),
        })
    }

    /// Installs the collection; later calls are ignored.
    pub fn set_collection(&self, collection: SharedCollection) {
        let _ = self.collection.set(collection);
    }

    pub fn collection(&self) -> Option<&SharedCollection> {
        self.collection.get()
    }

    /// Records that loading failed; the service stays up as `degraded`.
    pub fn set_load_error(&self, message: impl Into<String>) {
        let _ = self.load_error.set(message.into());
    }

    pub async fn status(&self) -> ServiceStatus {
        let embedder = self.embedder.clone();
        let healthy = tokio::task::spawn_blocking(move || embedder.healthy())
            .await
            .unwrap_or(false);
        let (state, collection_name, record_count) = match self.collection.get() {
            Some(c) => {
                let c = c.read();
                let state = if healthy {
                    ServiceState::Ok
                } else {
                    ServiceState::Degraded
                };
                (state, c.name().to_owned(), c.len())
            }
            None if self.load_error.get().is_some() => (ServiceState::Degraded, String::new(), 0),
            None => (ServiceState::Loading, String::new(), 0),
        };
        ServiceStatus {
            state,
            collection_name,
            record_count,
            embedder_id: self.embedder.id(),
            uptime_s: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Loads the store file on a blocking thread and installs it into `state`.
pub fn spawn_load(state: Arc<AppState>, path: PathBuf) -> tokio::task::JoinHandle<()> {
    tokio::task::spawn_blocking(move || match Collection::load(&path) {
        Ok(c) => {
            log::info!("loaded {} records from {}", c.len(), path.display());
            state.set_collection(SharedCollection::new(c));
        }
        Err(e) => {
            log::error!("{}: {e}", path.display());
            state.set_load_error(e.to_string());
        }
    })
}

pub fn router(state: Arc<AppState>, cors_origins: &[String]) -> Router {
    let origins: Vec<HeaderValue> = cors_origins
        .iter()
        .filter_map(|o| match HeaderValue::from_str(o) {
            Ok(v) => Some(v),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {o:?}");
                None
            }
        })
        .collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/query", post(query))
        .route("/api/status", get(status))
        .route("/api/scenario/{id}", get(scenario))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
        .layer(SetResponseHeaderLayer::if_not_present(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        ))
        .layer(cors)
}

/// Serves `app` until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        Self {
            status,
            body: json!({ "error": message.to_string() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        let status = match &e {
            SearchError::Embed(EmbedError::NoTokens(_)) => StatusCode::BAD_REQUEST,
            SearchError::Embed(EmbedError::EmbedderServiceUnavailable(_)) => {
                StatusCode::SERVICE_UNAVAILABLE
            }
            SearchError::Embed(_) => StatusCode::BAD_GATEWAY,
            SearchError::EmbedderMismatch { .. } | SearchError::EmptyCollection => {
                StatusCode::CONFLICT
            }
            SearchError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    text: String,
    #[serde(default = "default_n")]
    n: usize,
}

fn default_n() -> usize {
    DEFAULT_RESULT_COUNT
}

fn loaded(state: &AppState) -> Result<SharedCollection, ApiError> {
    if let Some(c) = state.collection() {
        return Ok(c.clone());
    }
    let body = match state.load_error.get() {
        Some(e) => json!({ "error": format!("collection failed to load: {e}"), "state": "degraded" }),
        None => json!({ "error": "collection is still loading", "state": "loading" }),
    };
    Err(ApiError {
        status: StatusCode::SERVICE_UNAVAILABLE,
        body,
    })
}

async fn query(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<QueryResult>, ApiError> {
    let request: QueryRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))?;
    if request.n == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "n must be at least 1"));
    }
    let collection = loaded(&state)?;
    let embedder = state.embedder.clone();
    let result = tokio::task::spawn_blocking(move || {
        search(&collection.read(), &request.text, request.n, embedder.as_ref())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))??;
    Ok(Json(result))
}

async fn status(State(state): State<Arc<AppState>>) -> Json<ServiceStatus> {
    Json(state.status().await)
}

async fn scenario(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<ScenarioView>, ApiError> {
    let collection = loaded(&state)?;
    let c = collection.read();
    let record = c
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown scenario {id:?}")))?;
    Ok(Json(ScenarioView {
        id: record.id.clone(),
        description: record.description.clone(),
        link: record.metadata.link.clone(),
        metadata: record.metadata.clone(),
    }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method not allowed")
}
