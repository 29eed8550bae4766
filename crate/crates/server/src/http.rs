//! JSON over HTTP for the annotator.
//!
//! Every error body is `{"code": "...", "message": "..."}` where `code` is the
//! name of the library error variant.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use rallyanchor_core::hints::{playback_hints, HintParams, SlowdownWindow};
use rallyanchor_core::store::{
    export, query_rallies, Clock, ContextAnnotation, ExportFormat, MatchInfo, MatchStore, Repository, Vocabulary,
};
use rallyanchor_core::{EventAnchor, EventType, MatchState, QueryRule, RallySpan, StoreError};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn bad_request(code: &str, message: impl ToString) -> Self {
        Self { status: StatusCode::BAD_REQUEST, code: code.into(), message: message.to_string() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_)
            | StoreError::RallyNotFound(_)
            | StoreError::EventNotFound(_)
            | StoreError::MatchNotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Deleted(_) | StoreError::AlreadyDeleted(_) => StatusCode::CONFLICT,
            StoreError::OutOfRallyBounds { .. }
            | StoreError::UnknownContextType(_)
            | StoreError::ValueNotInVocabulary { .. }
            | StoreError::EmptyRule
            | StoreError::BadRecord { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::CorruptLog { .. } | StoreError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self { status, code: e.code().into(), message: e.to_string() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request("BadRequest", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request("BadRequest", e.body_text())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { code: &self.code, message: &self.message })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Shared by every handler. Each match has exactly one writer: its store sits
/// behind a mutex, and readers copy out the current snapshot.
pub struct AppState {
    repo: Repository,
    vocab: Arc<Vocabulary>,
    clock: Arc<dyn Clock>,
    hints: HintParams,
    author: String,
    stores: RwLock<HashMap<String, Arc<Mutex<MatchStore>>>>,
}

impl AppState {
    pub fn new(repo: Repository, vocab: Vocabulary, clock: Arc<dyn Clock>, hints: HintParams, author: String) -> Self {
        Self { repo, vocab: Arc::new(vocab), clock, hints, author, stores: RwLock::new(HashMap::new()) }
    }

    /// The writer for a match, opening it from disk on first use.
    fn store(&self, match_id: &str) -> Result<Arc<Mutex<MatchStore>>, StoreError> {
        if let Some(s) = self.stores.read().get(match_id) {
            return Ok(s.clone());
        }
        let mut stores = self.stores.write();
        if let Some(s) = stores.get(match_id) {
            return Ok(s.clone());
        }
        if !self.repo.exists(match_id) {
            return Err(StoreError::MatchNotFound(match_id.to_string()));
        }
        let store = Arc::new(Mutex::new(self.repo.open(match_id, self.vocab.clone(), self.clock.clone())?));
        stores.insert(match_id.to_string(), store.clone());
        Ok(store)
    }

    fn snapshot(&self, match_id: &str) -> Result<Arc<MatchState>, StoreError> {
        Ok(self.store(match_id)?.lock().state())
    }

    /// Rally, anchor and annotation ids all start with the match id followed by `-`.
    fn owner(&self, id: &str, missing: StoreError) -> Result<Arc<Mutex<MatchStore>>, StoreError> {
        let Some((match_id, _)) = id.rsplit_once('-') else {
            return Err(missing);
        };
        self.store(match_id).map_err(|e| match e {
            StoreError::MatchNotFound(_) => missing,
            other => other,
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/matches", get(list_matches))
        .route("/matches/{id}/rallies", get(list_rallies))
        .route("/matches/{id}/query", post(query))
        .route("/matches/{id}/export", get(export_match))
        .route("/rallies/{id}/anchors", get(list_anchors).post(add_anchor))
        .route("/rallies/{id}/playback-hints", get(hints))
        .route("/anchors/{id}/calibrate", post(calibrate))
        .route("/anchors/{id}", delete(delete_anchor))
        .route("/annotations", put(annotate))
        .route("/vocabulary", get(vocabulary))
        .with_state(state)
}

#[derive(Serialize)]
struct MatchSummary {
    #[serde(flatten)]
    info: MatchInfo,
    rallies: usize,
    anchors: usize,
}

async fn list_matches(State(app): State<Arc<AppState>>) -> ApiResult<Vec<MatchSummary>> {
    let mut out = Vec::new();
    for id in app.repo.match_ids()? {
        let s = app.snapshot(&id)?;
        let anchors = s.anchors.values().filter(|a| a.is_live() && a.event_type != EventType::Rally).count();
        out.push(MatchSummary { info: s.info.clone(), rallies: s.rallies.len(), anchors });
    }
    Ok(Json(out))
}

#[derive(Serialize)]
struct RallyView {
    #[serde(flatten)]
    rally: RallySpan,
    strokes: usize,
    unmatched: bool,
}

async fn list_rallies(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<RallyView>> {
    let s = app.snapshot(&id)?;
    let views = s
        .rallies
        .iter()
        .map(|r| RallyView { strokes: s.strokes(&r.rally_id), unmatched: r.is_unmatched(), rally: r.clone() })
        .collect();
    Ok(Json(views))
}

#[derive(Deserialize)]
struct AnchorListParams {
    #[serde(default)]
    include_deleted: bool,
}

async fn list_anchors(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Result<Query<AnchorListParams>, QueryRejection>,
) -> ApiResult<Vec<EventAnchor>> {
    let Query(params) = params?;
    let s = app.owner(&id, StoreError::RallyNotFound(id.clone()))?.lock().state();
    if s.rally(&id).is_none() {
        return Err(StoreError::RallyNotFound(id).into());
    }
    Ok(Json(s.anchors_in(&id, params.include_deleted).into_iter().cloned().collect()))
}

#[derive(Deserialize)]
struct NewAnchor {
    frame: u32,
    #[serde(rename = "type")]
    event_type: EventType,
    x: Option<f64>,
    y: Option<f64>,
}

async fn add_anchor(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<NewAnchor>, JsonRejection>,
) -> Result<(StatusCode, Json<EventAnchor>), ApiError> {
    let Json(b) = body?;
    let store = app.owner(&id, StoreError::RallyNotFound(id.clone()))?;
    let a = store.lock().add_anchor(&id, b.frame, b.event_type, b.x, b.y)?;
    Ok((StatusCode::CREATED, Json(a)))
}

#[derive(Deserialize)]
struct Calibration {
    delta: i64,
}

#[derive(Serialize)]
struct Committed<T> {
    seq: u64,
    #[serde(flatten)]
    value: T,
}

async fn calibrate(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<Calibration>, JsonRejection>,
) -> ApiResult<Committed<EventAnchor>> {
    let Json(b) = body?;
    let store = app.owner(&id, StoreError::NotFound(id.clone()))?;
    let (value, seq) = store.lock().calibrate_seq(&id, b.delta)?;
    Ok(Json(Committed { seq, value }))
}

async fn delete_anchor(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<EventAnchor> {
    let store = app.owner(&id, StoreError::NotFound(id.clone()))?;
    let a = store.lock().delete_anchor(&id)?;
    Ok(Json(a))
}

#[derive(Deserialize)]
struct Annotation {
    event_id: String,
    context_type: String,
    value: String,
    author: Option<String>,
}

async fn annotate(
    State(app): State<Arc<AppState>>,
    body: Result<Json<Annotation>, JsonRejection>,
) -> ApiResult<ContextAnnotation> {
    let Json(b) = body?;
    let store = app.owner(&b.event_id, StoreError::EventNotFound(b.event_id.clone()))?;
    let author = b.author.as_deref().unwrap_or(&app.author);
    let n = store.lock().annotate(&b.event_id, &b.context_type, &b.value, author)?;
    Ok(Json(n))
}

#[derive(Deserialize)]
struct QueryBody {
    rule: QueryRule,
}

async fn query(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<QueryBody>, JsonRejection>,
) -> ApiResult<Vec<RallySpan>> {
    let Json(b) = body?;
    let s = app.snapshot(&id)?;
    Ok(Json(query_rallies(&s, &b.rule)?))
}

async fn hints(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<SlowdownWindow>> {
    let s = app.owner(&id, StoreError::RallyNotFound(id.clone()))?.lock().state();
    Ok(Json(playback_hints(&s, &id, &app.hints)?))
}

#[derive(Deserialize)]
struct ExportParams {
    format: Option<String>,
}

async fn export_match(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Result<Query<ExportParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(params) = params?;
    let format = match params.format.as_deref() {
        None => ExportFormat::Anchors,
        Some(f) => f.parse().map_err(|e| ApiError::bad_request("BadRequest", e))?,
    };
    let s = app.snapshot(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], export(&s, format)).into_response())
}

async fn vocabulary(State(app): State<Arc<AppState>>) -> Json<Vocabulary> {
    Json((*app.vocab).clone())
}
