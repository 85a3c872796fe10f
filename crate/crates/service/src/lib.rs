//! Survey service: serves blinded stimulus pairs, records preferences and
//! reports counts.
//!
//! Routes:
//!
//! * `GET  /api/pairs/next?session=<id>` next unanswered pair, or `{"status":"complete"}`
//! * `POST /api/responses` record a response (201, or 4xx with `{"error": ...}`)
//! * `GET  /api/summary` counts per comparison and role
//! * `GET  /stimuli/<session>/<pair>/<a|b>/NNNNN.png` overlay frames
//! * `GET  /health`
//!
//! Everything else falls through to the optional UI directory.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use framebias_core::survey::{
    NextPair, ResponseSubmission, Side, Summary, SurveyConfig, SurveyEngine, SurveyError,
};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Mutex<SurveyEngine>>,
}

impl AppState {
    pub fn new(engine: SurveyEngine) -> Self {
        Self {
            engine: Arc::new(Mutex::new(engine)),
        }
    }

    fn engine(&self) -> MutexGuard<'_, SurveyEngine> {
        self.engine.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct ApiError(SurveyError);

impl From<SurveyError> for ApiError {
    fn from(e: SurveyError) -> Self {
        Self(e)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SurveyError::UnknownPair(_) => StatusCode::NOT_FOUND,
            SurveyError::InvalidRole(_)
            | SurveyError::InvalidChoice(_)
            | SurveyError::InvalidSession(_) => StatusCode::BAD_REQUEST,
            SurveyError::Duplicate { .. } => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (
            status,
            Json(ErrorBody {
                error: self.0.to_string(),
            }),
        )
            .into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(ErrorBody { error: msg.into() }),
    )
        .into_response()
}

/// Acknowledgement for a recorded response. Carries nothing that reveals
/// which side held the higher frame rate.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Ack {
    pub status: String,
    pub pair_id: String,
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: Option<String>,
}

async fn next_pair(State(state): State<AppState>, Query(q): Query<SessionQuery>) -> Response {
    let Some(session) = q.session else {
        return bad_request("missing session query parameter");
    };
    match state.engine().next_pair(&session) {
        Ok(next) => Json::<NextPair>(next).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn record_response(
    State(state): State<AppState>,
    body: Result<Json<ResponseSubmission>, JsonRejection>,
) -> Response {
    let Json(sub) = match body {
        Ok(b) => b,
        Err(rej) => return bad_request(rej.body_text()),
    };
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let result = state.engine().record_response(&sub, now);
    match result {
        Ok(rec) => (
            StatusCode::CREATED,
            Json(Ack {
                status: "recorded".into(),
                pair_id: rec.pair_id,
            }),
        )
            .into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn summary(State(state): State<AppState>) -> Json<Summary> {
    Json(state.engine().summary())
}

fn is_frame_name(name: &str) -> bool {
    name.len() == 9 && name.ends_with(".png") && name[..5].bytes().all(|b| b.is_ascii_digit())
}

async fn stimulus(
    State(state): State<AppState>,
    Path((session, pair_id, side, file)): Path<(String, String, String, String)>,
) -> Response {
    let dir: Option<PathBuf> = Side::from_slug(&side)
        .filter(|_| is_frame_name(&file))
        .and_then(|side| {
            state
                .engine()
                .stimulus_dir(&session, &pair_id, side)
                .map(|d| d.to_owned())
        });
    let Some(dir) = dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match tokio::fs::read(dir.join(&file)).await {
        Ok(bytes) => (
            [
                (header::CONTENT_TYPE, "image/png"),
                (header::CACHE_CONTROL, "no-store"),
            ],
            Body::from(bytes),
        )
            .into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/pairs/next", get(next_pair))
        .route("/api/responses", post(record_response))
        .route("/api/summary", get(summary))
        .route("/stimuli/{session}/{pair_id}/{side}/{file}", get(stimulus))
        .route("/health", get(health))
        .with_state(state);
    let app = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(TraceLayer::new_for_http())
}

/// Binds `addr` and serves in a background task. Returns the bound address,
/// useful with port 0.
pub async fn spawn(
    state: AppState,
    ui_dir: Option<PathBuf>,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    let app = router(state, ui_dir);
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((bound, handle))
}

/// Builds the engine from a config and serves until ctrl-c.
pub async fn serve(
    cfg: SurveyConfig,
    addr: SocketAddr,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let engine = SurveyEngine::from_config(&cfg)?;
    let app = router(AppState::new(engine), cfg.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, store = %cfg.store.display(), "survey service listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
