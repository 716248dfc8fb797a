//! HTTP JSON API for interactive evasion sessions.
//!
//! All bodies are JSON and images travel as base64 PNG. Errors are returned as
//! `{"error": {"code": ..., "message": ...}}` with a matching status code.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime};

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::detector::{Detection, FaceDetector};
use crate::filters::{apply, catalog, transform_box, FaceContext, FilterError, FilterSchema, FilterSpec};
use crate::imaging::{decode_png, encode_png, is_true_accept, psnr, BoundingBox, Image};

pub const DEFAULT_BODY_LIMIT: usize = 20 * 1024 * 1024;
pub const DEFAULT_MAX_SESSIONS: usize = 64;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);
/// IoU above which a detection still counts as finding the session's face.
pub const EVADE_IOU_THRESHOLD: f64 = 0.1;

/// Eye centers inside a detector box, as fractions of its width and height.
const FALLBACK_EYE_Y: f64 = 0.38;
const FALLBACK_EYE_X: (f64, f64) = (0.3, 0.7);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    pub idle_timeout: Duration,
    pub body_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { max_sessions: DEFAULT_MAX_SESSIONS, idle_timeout: DEFAULT_IDLE_TIMEOUT, body_limit: DEFAULT_BODY_LIMIT }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSource {
    /// Eye positions supplied by the client.
    Client,
    /// Estimated from the largest initial detection.
    Detector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attempt {
    pub attempt: usize,
    pub filter_spec: FilterSpec,
    pub detections: Vec<Detection>,
    pub evaded: bool,
    pub psnr_db: Option<f64>,
    pub timestamp: String,
}

struct Session {
    image: Arc<Image>,
    context: Option<(FaceContext, ContextSource)>,
    initial: Vec<Detection>,
    history: Vec<Attempt>,
}

struct Slot {
    session: Arc<Mutex<Session>>,
    last_used: Instant,
}

/// In-memory sessions with a count bound (least recently used goes first) and idle expiry.
struct SessionStore {
    slots: HashMap<String, Slot>,
    max: usize,
    idle: Duration,
}

impl SessionStore {
    fn evict_idle(&mut self, now: Instant) {
        let idle = self.idle;
        self.slots.retain(|_, s| now.duration_since(s.last_used) < idle);
    }

    fn insert(&mut self, id: String, session: Session) {
        let now = Instant::now();
        self.evict_idle(now);
        while self.slots.len() >= self.max.max(1) {
            let oldest = self.slots.iter().min_by_key(|(_, s)| s.last_used).map(|(k, _)| k.clone());
            match oldest {
                Some(k) => self.slots.remove(&k),
                None => break,
            };
        }
        self.slots.insert(id, Slot { session: Arc::new(Mutex::new(session)), last_used: now });
    }

    fn get(&mut self, id: &str) -> Option<Arc<Mutex<Session>>> {
        let now = Instant::now();
        self.evict_idle(now);
        self.slots.get_mut(id).map(|s| {
            s.last_used = now;
            s.session.clone()
        })
    }
}

/// Shared state: the detector and catalog are immutable, each session has its own lock.
#[derive(Clone)]
pub struct AppState {
    detector: Arc<dyn FaceDetector>,
    catalog: Arc<Vec<FilterSchema>>,
    sessions: Arc<Mutex<SessionStore>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(detector: Arc<dyn FaceDetector>, config: ServiceConfig) -> Self {
        let store = SessionStore { slots: HashMap::new(), max: config.max_sessions, idle: config.idle_timeout };
        AppState { detector, catalog: Arc::new(catalog()), sessions: Arc::new(Mutex::new(store)), config }
    }

    pub fn session_count(&self) -> usize {
        self.store().slots.len()
    }

    fn store(&self) -> std::sync::MutexGuard<'_, SessionStore> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.store().get(id).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<BytesRejection> for ApiError {
    fn from(r: BytesRejection) -> Self {
        let status = r.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE { "payload_too_large" } else { "invalid_request" };
        ApiError::new(status, code, r.body_text())
    }
}

impl From<FilterError> for ApiError {
    fn from(e: FilterError) -> Self {
        let code = match e {
            FilterError::MissingContext(_) => "context_required",
            _ => "invalid_filter",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> Result<T, ApiError> {
    let body = body?;
    serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn decode_b64_png(text: &str) -> Result<Image, ApiError> {
    let payload = text.strip_prefix("data:image/png;base64,").unwrap_or(text);
    let bytes = BASE64.decode(payload.trim()).map_err(|e| ApiError::bad_request(format!("image is not valid base64: {e}")))?;
    decode_png(&bytes).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_image", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn lock(session: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|e| e.into_inner())
}

fn now_rfc3339() -> String {
    humantime::format_rfc3339_millis(SystemTime::now()).to_string()
}

fn largest(detections: &[Detection]) -> Option<BoundingBox> {
    detections.iter().map(|d| d.bbox).max_by(|a, b| a.area().total_cmp(&b.area()))
}

fn fallback_context(detections: &[Detection]) -> Option<FaceContext> {
    let b = largest(detections)?;
    let y = b.y + FALLBACK_EYE_Y * b.h;
    let left = (b.x + FALLBACK_EYE_X.0 * b.w, y);
    let right = (b.x + FALLBACK_EYE_X.1 * b.w, y);
    FaceContext::from_eye_centers(b, left, right).ok()
}

/// Face box for client-marked eyes: the largest detection containing the eye
/// midpoint, else a square of side 2.5 iod placed around the eyes.
fn face_box_for_eyes(detections: &[Detection], left: (f64, f64), right: (f64, f64), iod: f64) -> BoundingBox {
    let mid = ((left.0 + right.0) / 2.0, (left.1 + right.1) / 2.0);
    detections
        .iter()
        .map(|d| d.bbox)
        .filter(|b| mid.0 >= b.x && mid.0 <= b.right() && mid.1 >= b.y && mid.1 <= b.bottom())
        .max_by(|a, b| a.area().total_cmp(&b.area()))
        .unwrap_or(BoundingBox { x: mid.0 - 1.25 * iod, y: mid.1 - 0.9 * iod, w: 2.5 * iod, h: 2.5 * iod })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    image: String,
}

#[derive(Serialize)]
struct SessionCreated {
    session_id: String,
    width: u32,
    height: u32,
    initial_detections: Vec<Detection>,
    context_source: Option<ContextSource>,
}

async fn create_session(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(body)?;
    let st = state.clone();
    let (image, initial) = blocking(move || {
        let image = decode_b64_png(&req.image)?;
        let initial = st.detector.detect(&image).map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "detector", e.to_string()))?;
        Ok((image, initial))
    })
    .await?;
    let context = fallback_context(&initial).map(|c| (c, ContextSource::Detector));
    let id = uuid::Uuid::new_v4().simple().to_string();
    let resp = SessionCreated {
        session_id: id.clone(),
        width: image.width(),
        height: image.height(),
        initial_detections: initial.clone(),
        context_source: context.map(|c| c.1),
    };
    state.store().insert(id, Session { image: Arc::new(image), context, initial, history: Vec::new() });
    Ok((StatusCode::CREATED, Json(resp)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetContext {
    eye_left: [f64; 2],
    eye_right: [f64; 2],
}

async fn set_context(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let req: SetContext = parse_body(body)?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let (left, right) = ((req.eye_left[0], req.eye_left[1]), (req.eye_right[0], req.eye_right[1]));
    if ![left.0, left.1, right.0, right.1].iter().all(|v| v.is_finite()) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_context", "eye coordinates must be finite"));
    }
    let iod = (right.0 - left.0).hypot(right.1 - left.1);
    if iod <= 0.0 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_context",
            "eye positions coincide: click the centers of two different eyes",
        ));
    }
    let bbox = face_box_for_eyes(&s.initial, left, right, iod);
    let ctx = FaceContext::from_eye_centers(bbox, left, right)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_context", e.to_string()))?;
    s.context = Some((ctx, ContextSource::Client));
    Ok(Json(json!({"iod": iod, "face_box": bbox})))
}

async fn list_filters(State(state): State<AppState>) -> Json<Vec<FilterSchema>> {
    Json(state.catalog.as_ref().clone())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Evade {
    filter_spec: FilterSpec,
}

#[derive(Serialize)]
struct Evaded {
    attempt: usize,
    image: String,
    width: u32,
    height: u32,
    detections: Vec<Detection>,
    evaded: bool,
    /// PSNR against the original; null for identical images or changed dimensions.
    psnr_db: Option<f64>,
}

async fn evade(State(state): State<AppState>, Path(id): Path<String>, body: Result<Bytes, BytesRejection>) -> Result<Json<Evaded>, ApiError> {
    let req: Evade = parse_body(body)?;
    let session = state.session(&id)?;
    let detector = state.detector.clone();
    blocking(move || {
        let spec = req.filter_spec;
        spec.resolve()?;
        let mut s = lock(&session);
        let ctx = s.context.map(|c| c.0);
        let out = apply(&spec, &s.image, ctx.as_ref())?;
        let detections = detector.detect(&out).map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "detector", e.to_string()))?;
        let boxes: Vec<BoundingBox> = detections.iter().map(|d| d.bbox).collect();
        let face = ctx.map(|c| c.bbox).or_else(|| largest(&s.initial));
        let evaded = match face {
            Some(f) => {
                let truth = transform_box(&spec, &f, s.image.width(), s.image.height(), ctx.as_ref())?;
                !is_true_accept(&boxes, &truth, EVADE_IOU_THRESHOLD)
            }
            None => boxes.is_empty(),
        };
        let psnr_db = psnr(&s.image, &out).filter(|p| p.is_finite());
        let png = encode_png(&out).map_err(|e| ApiError::internal(e.to_string()))?;
        let attempt = s.history.len() + 1;
        s.history.push(Attempt { attempt, filter_spec: spec, detections: detections.clone(), evaded, psnr_db, timestamp: now_rfc3339() });
        Ok(Json(Evaded { attempt, image: BASE64.encode(png), width: out.width(), height: out.height(), detections, evaded, psnr_db }))
    })
    .await
}

async fn history(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<Attempt>>, ApiError> {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(Json(s.history.clone()))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed for this endpoint")
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.body_limit;
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}/context", post(set_context))
        .route("/session/{id}/evade", post(evade))
        .route("/session/{id}/history", get(history))
        .route("/filters", get(list_filters))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState) -> Result<(), ServiceError> {
    let sweeper = state.clone();
    let period = (state.config.idle_timeout / 4).clamp(Duration::from_millis(100), Duration::from_secs(60));
    let handle = tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.store().evict_idle(Instant::now());
        }
    });
    let result = axum::serve(listener, router(state)).await;
    handle.abort();
    Ok(result?)
}

/// Binds `addr` and serves until the process exits.
pub fn serve(addr: SocketAddr, state: AppState) -> Result<(), ServiceError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })?;
        log::info!("listening on http://{}", listener.local_addr()?);
        serve_on(listener, state).await
    })
}
