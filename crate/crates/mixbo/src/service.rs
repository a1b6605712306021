//! HTTP facade over the campaign store.
//!
//! Writes for one campaign are serialized by a per-campaign async mutex and
//! run on the blocking pool; reads go to the last snapshot and never wait for
//! a fit. Every response body carries the campaign `version`.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mixbo_core::campaign::{Campaign, CampaignConfig, Measurement, ResultEntry, Source};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{AppError, Result};
use crate::formats;
use crate::store::Store;

/// JSON schema of the request and response bodies.
pub const API_SCHEMA: &str = include_str!("../configs/api-schema.json");

#[derive(Debug, Clone)]
pub struct AppState {
    store: Arc<Store>,
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
    fitting: Arc<Mutex<HashSet<String>>>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState {
            store: Arc::new(store),
            locks: Arc::default(),
            fitting: Arc::default(),
        }
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    fn is_fitting(&self, id: &str) -> bool {
        self.fitting.lock().expect("fitting set").contains(id)
    }

    /// Runs a store write for `id` off the async runtime, one at a time.
    async fn write<T: Send + 'static>(
        &self,
        id: &str,
        fits: bool,
        f: impl FnOnce(&Store) -> Result<T> + Send + 'static,
    ) -> Result<T> {
        let lock = self.lock_for(id);
        let _held = lock.lock().await;
        if fits {
            self.fitting
                .lock()
                .expect("fitting set")
                .insert(id.to_string());
        }
        let store = self.store.clone();
        let out = tokio::task::spawn_blocking(move || f(&store)).await;
        if fits {
            self.fitting.lock().expect("fitting set").remove(id);
        }
        out.unwrap_or_else(|e| Err(AppError::Validation(format!("worker failed: {e}"))))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/schema", get(schema))
        .route("/campaigns", post(create).get(list))
        .route("/campaigns/{id}", get(show))
        .route("/campaigns/{id}/suggest", post(suggest))
        .route("/campaigns/{id}/results", post(results))
        .route("/campaigns/{id}/metrics", get(metrics))
        .route("/campaigns/{id}/front", get(front))
        .route("/campaigns/{id}/candidates", get(candidates))
        .with_state(state)
}

pub async fn serve(store: Store, addr: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::io(addr, e))?;
    axum::serve(listener, router(AppState::new(store)))
        .await
        .map_err(|e| AppError::io(addr, e))
}

/// Error body: `{"error": kind, "message": ..., "offenders": [...]}`.
pub struct ApiError(AppError);

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError(e)
    }
}

impl From<mixbo_core::Error> for ApiError {
    fn from(e: mixbo_core::Error) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use mixbo_core::Error as E;
        let e = self.0;
        let (status, kind) = match &e {
            AppError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            AppError::Exists(_) => (StatusCode::CONFLICT, "exists"),
            AppError::Stale { .. } => (StatusCode::CONFLICT, "stale_version"),
            AppError::Locked(_) => (StatusCode::CONFLICT, "locked"),
            AppError::Engine(E::WrongStatus { .. }) => (StatusCode::CONFLICT, "wrong_status"),
            AppError::Engine(x) if x.is_numerical() => {
                (StatusCode::INTERNAL_SERVER_ERROR, "numerical")
            }
            AppError::Io { .. } | AppError::Corrupt { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "storage")
            }
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
        };
        let offenders: Vec<String> = match &e {
            AppError::Engine(
                E::UnknownFormulations(v)
                | E::DuplicateResults(v)
                | E::MissingResults(v)
                | E::ViabilityOutOfRange { offenders: v, .. },
            ) => v.clone(),
            AppError::Row { row, .. } => vec![format!("row {row}")],
            _ => Vec::new(),
        };
        let mut body = json!({ "error": kind, "message": e.to_string(), "offenders": offenders });
        if let AppError::Stale { current, .. } = e {
            body["version"] = json!(current);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult = std::result::Result<Response, ApiError>;

fn summary(state: &AppState, c: &Campaign) -> Value {
    json!({
        "id": c.id(),
        "version": c.version,
        "status": c.status.name(),
        "activity": if state.is_fitting(c.id()) { "fitting" } else { "idle" },
        "method": c.method().name(),
        "iteration": c.iteration,
        "iterations": c.config.iterations,
        "observations": c.observations.len(),
        "hypervolume": c.metrics.last().map(|m| m.hypervolume),
        "pending": c.pending.as_ref().map(|p| p.candidates.len()),
    })
}

async fn schema() -> Response {
    ([(header::CONTENT_TYPE, "application/json")], API_SCHEMA).into_response()
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    config: Value,
    #[serde(default)]
    initial: Vec<Measurement>,
}

async fn create(State(state): State<AppState>, Json(req): Json<CreateRequest>) -> ApiResult {
    let bytes = serde_json::to_vec(&req.config).expect("value serializes");
    let config: CampaignConfig = crate::cli::parse_campaign_config(&bytes)?;
    let id = config.id.clone();
    let c = state
        .write(&id, false, move |s| s.create(config, req.initial))
        .await?;
    Ok((StatusCode::CREATED, Json(summary(&state, &c))).into_response())
}

async fn list(State(state): State<AppState>) -> ApiResult {
    let ids = state.store.ids()?;
    Ok(Json(json!({ "campaigns": ids })).into_response())
}

async fn show(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let c = state.store.load(&id)?;
    Ok(Json(summary(&state, &c)).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct SuggestRequest {
    version: Option<u64>,
}

async fn suggest(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: SuggestRequest = if body.is_empty() {
        SuggestRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| AppError::Validation(format!("body: {e}")))?
    };
    let sid = id.clone();
    let (c, batch) = state
        .write(&id, true, move |s| s.suggest(&sid, req.version))
        .await?;
    Ok(
        Json(json!({ "version": c.version, "status": c.status.name(), "suggestion": batch }))
            .into_response(),
    )
}

#[derive(Debug, Deserialize)]
struct ResultsRequest {
    version: Option<u64>,
    results: Vec<ResultEntry>,
    #[serde(default)]
    partial: bool,
}

#[derive(Debug, Default, Deserialize)]
struct ResultsQuery {
    version: Option<u64>,
    #[serde(default)]
    partial: bool,
}

async fn results(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<ResultsQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));
    let req = if is_csv {
        let space = state.store.load(&id)?.config.space;
        ResultsRequest {
            version: query.version,
            results: formats::read_results(&body[..], &space)?,
            partial: query.partial,
        }
    } else {
        serde_json::from_slice(&body).map_err(|e| AppError::Validation(format!("body: {e}")))?
    };
    let sid = id.clone();
    let c = state
        .write(&id, true, move |s| {
            s.ingest(&sid, req.version, req.results, req.partial, Source::Lab)
        })
        .await?;
    Ok(Json(json!({
        "version": c.version,
        "status": c.status.name(),
        "metric": c.metrics.last(),
    }))
    .into_response())
}

async fn metrics(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let c = state.store.load(&id)?;
    Ok(Json(json!({ "version": c.version, "metrics": c.metrics })).into_response())
}

async fn front(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let c = state.store.load(&id)?;
    let front = c.front()?;
    Ok(Json(json!({ "version": c.version, "front": front })).into_response())
}

#[derive(Debug, Deserialize)]
struct CandidatesQuery {
    limit: Option<usize>,
}

async fn candidates(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CandidatesQuery>,
) -> ApiResult {
    let c = state.store.load(&id)?;
    let list: Vec<_> = c
        .pending
        .iter()
        .flat_map(|p| p.candidates.iter())
        .take(q.limit.unwrap_or(usize::MAX))
        .collect();
    Ok(
        Json(json!({ "version": c.version, "status": c.status.name(), "candidates": list }))
            .into_response(),
    )
}
