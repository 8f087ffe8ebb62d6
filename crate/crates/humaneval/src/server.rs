//! HTTP/JSON interface of the rating service.
//!
//! Schema version 1. Every response carries an `x-schema-version` header,
//! and request bodies may state `schema_version`, which must then match.
//!
//! | Method | Path | Body / query | Response |
//! |---|---|---|---|
//! | GET | `/api/version` | | `{schema_version}` |
//! | GET | `/api/study/{id}/protocol` | | [`ProtocolSheet`] |
//! | POST | `/api/study/{id}/raters` | `{rater_id}` | `{rater_id}` |
//! | GET | `/api/study/{id}/next` | `?rater=` | `{item: StudyItem or null}` |
//! | POST | `/api/ratings` | `{study_id, records: [RatingRecord]}` | `{accepted}` |
//! | POST | `/api/flags` | `{study_id, item_id, rater_id, categories, note?, timestamp?}` | `{accepted}` |
//! | GET | `/api/study/{id}/results` | | `{study_id, protocol, complete, aggregate}` |
//! | GET | `/api/media/{ref}` | `Range: bytes=a-b` | file bytes, 206 for ranges |
//!
//! Errors are `{error, message}` with status 400 (config), 401 (unknown
//! rater), 404 (unknown study, item or media), 409 (nothing to aggregate),
//! 416 (bad range), 422 (validation) or 500.

use std::collections::BTreeMap;
use std::io::SeekFrom;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::io::{AsyncReadExt, AsyncSeekExt};

use crate::aggregate::Aggregate;
use crate::events::{FlagRecord, RatingRecord, SCHEMA_VERSION};
use crate::items::StudyItem;
use crate::protocol::{FlagCategory, Protocol, ProtocolSheet};
use crate::service::StudyService;
use crate::StudyError;

/// Studies served by one process plus the media directory.
#[derive(Debug, Default)]
pub struct AppState {
    pub studies: BTreeMap<String, Arc<StudyService>>,
    pub media_root: Option<PathBuf>,
}

impl AppState {
    pub fn new(media_root: Option<PathBuf>) -> Self {
        Self { studies: BTreeMap::new(), media_root }
    }

    pub fn add(&mut self, service: StudyService) {
        self.studies.insert(service.study_id(), Arc::new(service));
    }

    fn study(&self, id: &str) -> Result<Arc<StudyService>, ApiError> {
        self.studies.get(id).cloned().ok_or_else(|| ApiError::from(StudyError::NotFound(format!("study {id:?}"))))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        let (status, kind) = match &e {
            StudyError::Config(_) => (StatusCode::BAD_REQUEST, "config"),
            StudyError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            StudyError::Auth(_) => (StatusCode::UNAUTHORIZED, "auth"),
            StudyError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            StudyError::Domain(_) => (StatusCode::CONFLICT, "domain"),
            StudyError::Io(_) | StudyError::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self { status, kind, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        versioned(self.status, Json(json!({"error": self.kind, "message": self.message})))
    }
}

fn versioned(status: StatusCode, body: impl IntoResponse) -> Response {
    let mut res = (status, body).into_response();
    res.headers_mut().insert("x-schema-version", HeaderValue::from(SCHEMA_VERSION));
    res
}

fn ok<T: Serialize>(body: T) -> Response {
    versioned(StatusCode::OK, Json(body))
}

fn check_version(v: Option<u32>) -> Result<(), ApiError> {
    match v {
        Some(v) if v != SCHEMA_VERSION => {
            Err(StudyError::Validation(format!("schema_version {v} not supported (server speaks {SCHEMA_VERSION})")).into())
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Deserialize)]
pub struct RegisterRequest {
    pub schema_version: Option<u32>,
    pub rater_id: String,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub rater: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NextResponse {
    pub item: Option<StudyItem>,
}

#[derive(Debug, Deserialize)]
pub struct RatingsRequest {
    pub schema_version: Option<u32>,
    pub study_id: String,
    pub records: Vec<RatingRecord>,
}

#[derive(Debug, Deserialize)]
pub struct FlagRequest {
    pub schema_version: Option<u32>,
    pub study_id: String,
    pub item_id: String,
    pub rater_id: String,
    pub categories: Vec<FlagCategory>,
    pub note: Option<String>,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultsResponse {
    pub study_id: String,
    pub protocol: Protocol,
    pub complete: bool,
    pub aggregate: Aggregate,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/version", get(|| async { ok(json!({"schema_version": SCHEMA_VERSION})) }))
        .route("/api/study/{id}/protocol", get(protocol))
        .route("/api/study/{id}/raters", post(register))
        .route("/api/study/{id}/next", get(next))
        .route("/api/study/{id}/results", get(results))
        .route("/api/ratings", post(ratings))
        .route("/api/flags", post(flags))
        .route("/api/media/{*path}", get(media))
        .with_state(state)
}

async fn protocol(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let p = st.study(&id)?.read(|s| s.config().protocol);
    Ok(ok(ProtocolSheet::new(p)))
}

async fn register(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<RegisterRequest>,
) -> Result<Response, ApiError> {
    check_version(req.schema_version)?;
    st.study(&id)?.register(&req.rater_id, req.timestamp)?;
    Ok(ok(json!({"rater_id": req.rater_id})))
}

async fn next(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ApiError> {
    let item = st.study(&id)?.next_item(&q.rater)?;
    Ok(ok(NextResponse { item }))
}

async fn results(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let svc = st.study(&id)?;
    let aggregate = svc.results()?;
    let (protocol, complete) = svc.read(|s| (s.config().protocol, s.is_complete()));
    Ok(ok(ResultsResponse { study_id: id, protocol, complete, aggregate }))
}

async fn ratings(State(st): State<Arc<AppState>>, Json(req): Json<RatingsRequest>) -> Result<Response, ApiError> {
    check_version(req.schema_version)?;
    let n = st.study(&req.study_id)?.record_ratings(req.records)?;
    Ok(ok(json!({"accepted": n})))
}

async fn flags(State(st): State<Arc<AppState>>, Json(req): Json<FlagRequest>) -> Result<Response, ApiError> {
    check_version(req.schema_version)?;
    st.study(&req.study_id)?.record_flag(FlagRecord {
        item_id: req.item_id,
        rater_id: req.rater_id,
        categories: req.categories.into_iter().collect(),
        note: req.note,
        timestamp: req.timestamp,
    })?;
    Ok(ok(json!({"accepted": 1})))
}

/// Resolves a media reference inside `root`, refusing anything that could
/// escape it.
fn resolve_media(root: &Path, reference: &str) -> Option<PathBuf> {
    let rel = Path::new(reference);
    if reference.is_empty() || reference.contains('\\') {
        return None;
    }
    rel.components().all(|c| matches!(c, Component::Normal(_))).then(|| root.join(rel))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("mp4") => "video/mp4",
        Some("webm") => "video/webm",
        Some("mov") => "video/quicktime",
        Some("wav") => "audio/wav",
        Some("mp3") => "audio/mpeg",
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

/// Parses a single `bytes=` range against a file of `len` bytes into an
/// inclusive (start, end). `Ok(None)` means no usable Range header.
pub fn parse_range(value: &str, len: u64) -> Result<Option<(u64, u64)>, ()> {
    let Some(spec) = value.trim().strip_prefix("bytes=") else { return Ok(None) };
    if spec.contains(',') {
        // multipart ranges are not served; fall back to the full body
        return Ok(None);
    }
    let (a, b) = spec.split_once('-').ok_or(())?;
    let (a, b) = (a.trim(), b.trim());
    let range = if a.is_empty() {
        let n: u64 = b.parse().map_err(|_| ())?;
        if n == 0 || len == 0 {
            return Err(());
        }
        (len.saturating_sub(n), len - 1)
    } else {
        let start: u64 = a.parse().map_err(|_| ())?;
        let end = if b.is_empty() { len.saturating_sub(1) } else { b.parse::<u64>().map_err(|_| ())?.min(len.saturating_sub(1)) };
        if start >= len || end < start {
            return Err(());
        }
        (start, end)
    };
    Ok(Some(range))
}

async fn media(
    State(st): State<Arc<AppState>>,
    UrlPath(reference): UrlPath<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let not_found = || ApiError::from(StudyError::NotFound(format!("media {reference:?}")));
    let root = st.media_root.as_deref().ok_or_else(not_found)?;
    let path = resolve_media(root, &reference).ok_or_else(not_found)?;
    let mut file = tokio::fs::File::open(&path).await.map_err(|_| not_found())?;
    let meta = file.metadata().await.map_err(StudyError::from)?;
    if !meta.is_file() {
        return Err(not_found());
    }
    let len = meta.len();
    let range = match headers.get(header::RANGE).and_then(|v| v.to_str().ok()) {
        Some(v) => parse_range(v, len),
        None => Ok(None),
    };
    let mut res_headers = HeaderMap::new();
    res_headers.insert(header::ACCEPT_RANGES, HeaderValue::from_static("bytes"));
    res_headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type(&path)));
    match range {
        Err(()) => {
            res_headers.insert(header::CONTENT_RANGE, HeaderValue::from_str(&format!("bytes */{len}")).expect("ascii"));
            Ok(versioned(StatusCode::RANGE_NOT_SATISFIABLE, res_headers))
        }
        Ok(None) => {
            let mut body = Vec::with_capacity(len as usize);
            file.read_to_end(&mut body).await.map_err(StudyError::from)?;
            Ok(versioned(StatusCode::OK, (res_headers, body)))
        }
        Ok(Some((start, end))) => {
            file.seek(SeekFrom::Start(start)).await.map_err(StudyError::from)?;
            let mut body = vec![0u8; (end - start + 1) as usize];
            file.read_exact(&mut body).await.map_err(StudyError::from)?;
            res_headers.insert(
                header::CONTENT_RANGE,
                HeaderValue::from_str(&format!("bytes {start}-{end}/{len}")).expect("ascii"),
            );
            Ok(versioned(StatusCode::PARTIAL_CONTENT, (res_headers, body)))
        }
    }
}

/// Serves `state` until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("study service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}
