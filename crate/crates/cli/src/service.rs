//! JSON-over-HTTP service under `/v1`.
//!
//! Contexts live in memory only, in an LRU store; restarting the service invalidates
//! every id.

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use lru::LruCache;
use serde_json::json;
use tower_http::services::ServeDir;

use angio_core::contour::VesselContour;
use angio_core::interactive::{track_segment, InteractiveRequest};
use angio_core::pipeline::{analyze_auto, prepare, Prepared};
use angio_core::report::AnalysisReport;
use angio_core::{Config, Error, GrayImage};

pub const DEFAULT_CAPACITY: usize = 32;
const MAX_UPLOAD: usize = 64 << 20;

pub struct ImageContext {
    pub id: String,
    pub prepared: Prepared,
    pub config: Config,
    pub created: SystemTime,
}

pub struct AppState {
    contexts: Mutex<LruCache<String, Arc<ImageContext>>>,
    next_id: AtomicU64,
    config: Config,
}

impl AppState {
    pub fn new(config: Config, capacity: usize) -> Self {
        Self {
            contexts: Mutex::new(LruCache::new(NonZeroUsize::new(capacity.max(1)).expect("nonzero"))),
            next_id: AtomicU64::new(1),
            config,
        }
    }

    fn get(&self, id: &str) -> Option<Arc<ImageContext>> {
        self.contexts.lock().expect("store lock").get(id).cloned()
    }

    fn len(&self) -> usize {
        self.contexts.lock().expect("store lock").len()
    }
}

pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Unprocessable(serde_json::Value),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, json!({ "error": format!("unknown context {id}") })),
            ApiError::BadRequest(msg) => (StatusCode::BAD_REQUEST, json!({ "error": msg })),
            ApiError::Unprocessable(body) => (StatusCode::UNPROCESSABLE_ENTITY, body),
            ApiError::Internal(msg) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Unreachable { partial } => ApiError::Unprocessable(json!({
                "error": "endpoint unreachable",
                "partial": partial,
            })),
            Error::Image(_) | Error::Config(_) | Error::OutsideImage { .. } | Error::ImageTooSmall { .. } => {
                ApiError::BadRequest(e.to_string())
            }
            Error::EmptyRidgeSet | Error::NearBorder { .. } | Error::DegenerateInit(_) => {
                ApiError::Unprocessable(json!({ "error": e.to_string() }))
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(ApiError::from)
}

fn json_text(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

#[derive(serde::Serialize)]
struct Created<'a> {
    id: &'a str,
    width: usize,
    height: usize,
    /// Base64 PNG of the equalized image.
    preview_png: String,
    contour: &'a VesselContour,
}

async fn create_context(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let img = GrayImage::decode(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let config = state.config.clone();
    let cfg = config.clone();
    let prepared = blocking(move || prepare(&img, &cfg)).await?;
    let png = prepared
        .stages
        .equalized
        .encode_png()
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let id = format!("c{:06}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let ctx = Arc::new(ImageContext {
        id: id.clone(),
        prepared,
        config,
        created: SystemTime::now(),
    });
    state.contexts.lock().expect("store lock").put(id.clone(), ctx.clone());
    let body = Created {
        id: &id,
        width: ctx.prepared.original.width(),
        height: ctx.prepared.original.height(),
        preview_png: base64::engine::general_purpose::STANDARD.encode(png),
        contour: &ctx.prepared.contour,
    };
    Ok(Json(body).into_response())
}

fn context(state: &AppState, id: &str) -> ApiResult<Arc<ImageContext>> {
    state.get(id).ok_or_else(|| ApiError::NotFound(id.to_string()))
}

async fn auto(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let ctx = context(&state, &id)?;
    let report = blocking(move || {
        let auto = analyze_auto(&ctx.prepared, &ctx.config)?;
        let img = &ctx.prepared.original;
        Ok(AnalysisReport::new(ctx.id.clone(), img.width(), img.height(), &auto))
    })
    .await?;
    Ok(json_text(report.to_json()))
}

async fn segment(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let ctx = context(&state, &id)?;
    let req: InteractiveRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("malformed request: {e}")))?;
    let route = blocking(move || {
        let p = &ctx.prepared;
        track_segment(p.tracking(), &p.ridges, &p.contour, &req, &ctx.config)
    })
    .await?;
    Ok(json_text(serde_json::to_string(&route).expect("route serializes")))
}

async fn image(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let ctx = context(&state, &id)?;
    let png = ctx
        .prepared
        .stages
        .equalized
        .encode_png()
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "contexts": state.len() }))
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/contexts", post(create_context))
        .route("/contexts/{id}/auto", post(auto))
        .route("/contexts/{id}/segment", post(segment))
        .route("/contexts/{id}/image", get(image))
        .route("/health", get(health));
    let app = Router::new()
        .nest("/v1", api)
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(port: u16, static_dir: Option<PathBuf>, config: Config) -> anyhow::Result<()> {
    let state = Arc::new(AppState::new(config, DEFAULT_CAPACITY));
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await?;
    Ok(())
}
