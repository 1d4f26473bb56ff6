//! HTTP service driving interactive sessions.
//!
//! | method | path                         | purpose                          |
//! |--------|------------------------------|----------------------------------|
//! | POST   | `/sessions`                  | create from a [`SessionConfig`]  |
//! | GET    | `/sessions/{id}/query`       | pending pair, or finished        |
//! | POST   | `/sessions/{id}/answer`      | answer the pending pair          |
//! | GET    | `/sessions/{id}/clustering`  | latest assignment and metrics    |
//! | GET    | `/sessions/{id}/export`      | session file                     |
//!
//! Each session sits behind its own mutex, held for the whole of an answer
//! including the engine advancement it triggers, so concurrent answers to
//! the same pair produce one success and conflicts for the rest.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use activeclust_core::engine::{OracleSource, Session, Status};
use activeclust_core::metrics::{jaccard, v_measure};
use activeclust_core::spectral::ConstraintKind;
use activeclust_core::Matrix;
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::config::SessionConfig;
use crate::error::Error;
use crate::runner::wall_clock;
use crate::session_file;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Base directory for relative dataset paths and auto-saved sessions.
    pub data_dir: Option<PathBuf>,
    /// UI bundle served under `/ui`.
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origin; any origin when absent.
    pub cors_origin: Option<String>,
    pub idle_ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { data_dir: None, static_dir: None, cors_origin: None, idle_ttl: Duration::from_secs(24 * 3600) }
    }
}

struct Handle {
    session: Session,
    config: SessionConfig,
    features: Option<Matrix>,
    feature_names: Option<Vec<String>>,
    created_at: u64,
    last_activity: Instant,
}

impl Handle {
    fn touch(&mut self) {
        self.last_activity = Instant::now();
    }

    fn clock_base(&self) -> u64 {
        self.session.curve().last().map_or(0, |p| p.wall_ms)
    }
}

type Shared = Arc<Mutex<Handle>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Shared>>>,
    cfg: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Self {
        Self { sessions: Arc::default(), cfg: Arc::new(cfg) }
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}")))
    }

    /// Drops sessions idle past the TTL, saving them first when a data
    /// directory is configured.
    fn evict_idle(&self) {
        let mut table = self.sessions.lock().expect("session table poisoned");
        table.retain(|id, handle| {
            let Ok(h) = handle.try_lock() else { return true };
            if h.last_activity.elapsed() < self.cfg.idle_ttl {
                return true;
            }
            if let Some(dir) = &self.cfg.data_dir {
                let dir = dir.join("sessions");
                let saved = std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e)).and_then(|_| {
                    session_file::save_session(&dir.join(format!("{id}.json")), &h.session, Some(&h.config))
                });
                if let Err(e) = saved {
                    log::warn!("auto-save of idle session {id} failed: {e}");
                }
            }
            log::info!("evicted idle session {id}");
            false
        });
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

pub fn router(state: AppState) -> Router {
    let cors = match &state.cfg.cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(v).allow_methods(Any).allow_headers(Any),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {origin:?}");
                CorsLayer::permissive()
            }
        },
        None => CorsLayer::permissive(),
    };
    let mut app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/query", get(next_query))
        .route("/sessions/{id}/answer", post(submit_answer))
        .route("/sessions/{id}/clustering", get(get_clustering))
        .route("/sessions/{id}/export", get(export_session));
    if let Some(dir) = &state.cfg.static_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.layer(cors).with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, cfg: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(cfg))).await
}

fn pair_json(status: Status) -> Value {
    match status {
        Status::AwaitingAnswer { i, j } => json!([i, j]),
        _ => Value::Null,
    }
}

fn status_name(status: Status) -> &'static str {
    match status {
        Status::Running => "running",
        Status::AwaitingAnswer { .. } => "awaiting_answer",
        Status::Finished => "finished",
    }
}

fn bad_request(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, e.to_string())
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let mut config: SessionConfig = serde_json::from_slice(&body).map_err(bad_request)?;
    config.engine.oracle = OracleSource::Interactive;
    config.validate().map_err(bad_request)?;
    state.evict_idle();

    let data_dir = state.cfg.data_dir.clone();
    let handle = tokio::task::spawn_blocking(move || -> Result<Handle, ApiError> {
        let data = config
            .dataset
            .prepare(data_dir.as_deref())
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        let mut session = data.session(&config.engine).map_err(|e| match e {
            Error::Core(activeclust_core::Error::InvalidParameter(_)) => bad_request(e),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, other.to_string()),
        })?;
        session.advance(&mut wall_clock(0)).map_err(internal)?;
        Ok(Handle {
            session,
            config,
            features: data.features,
            feature_names: data.feature_names,
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            last_activity: Instant::now(),
        })
    })
    .await
    .map_err(internal)??;

    let id = uuid::Uuid::new_v4().simple().to_string();
    let status = handle.session.status();
    log::info!("created session {id} with {} samples", handle.session.len());
    state.sessions.lock().expect("session table poisoned").insert(id.clone(), Arc::new(Mutex::new(handle)));
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "status": status_name(status), "pair": pair_json(status) })))
        .into_response())
}

fn sample_meta(h: &Handle, i: usize) -> Value {
    let features = h.features.as_ref().map(|f| f.row(i).to_vec());
    json!({ "id": i, "features": features })
}

async fn next_query(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let shared = state.get(&id)?;
    let mut h = shared.lock().expect("session poisoned");
    h.touch();
    let s = &h.session;
    let common = json!({
        "queries_used": s.queries_used(),
        "budget": s.config().query_budget,
        "n_c": s.n_c(),
        "iteration": s.iteration(),
        "certain_sets": s.sets().m(),
    });
    let mut body = match s.status() {
        Status::AwaitingAnswer { i, j } => json!({
            "status": "awaiting_answer",
            "pair": [i, j],
            "sample_meta": [sample_meta(&h, i), sample_meta(&h, j)],
            "feature_names": h.feature_names,
        }),
        other => json!({ "status": status_name(other) }),
    };
    body.as_object_mut().expect("object").extend(common.as_object().expect("object").clone());
    Ok(Json(body))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerText {
    #[serde(alias = "must_link")]
    Must,
    #[serde(alias = "cannot_link")]
    Cannot,
}

impl From<AnswerText> for ConstraintKind {
    fn from(a: AnswerText) -> Self {
        match a {
            AnswerText::Must => ConstraintKind::MustLink,
            AnswerText::Cannot => ConstraintKind::CannotLink,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerBody {
    pub pair: [usize; 2],
    pub answer: AnswerText,
}

async fn submit_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let body: AnswerBody = serde_json::from_slice(&body).map_err(bad_request)?;
    let shared = state.get(&id)?;
    tokio::task::spawn_blocking(move || {
        let mut h = shared.lock().expect("session poisoned");
        h.touch();
        let [i, j] = body.pair;
        if h.session.pending_pair() != Some((i, j)) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("pair ({i}, {j}) is not the pending query")));
        }
        let base = h.clock_base();
        let status = h.session.submit_answer(i, j, body.answer.into(), &mut wall_clock(base)).map_err(internal)?;
        Ok(Json(json!({
            "accepted": true,
            "next": pair_json(status),
            "status": status_name(status),
            "queries_used": h.session.queries_used(),
            "n_c": h.session.n_c(),
        })))
    })
    .await
    .map_err(internal)?
}

async fn get_clustering(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let shared = state.get(&id)?;
    let mut h = shared.lock().expect("session poisoned");
    h.touch();
    let s = &h.session;
    let asg = s.assignment().ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no clustering computed yet"))?;
    let mut body = json!({
        "labels": asg.labels,
        "n_c": s.n_c(),
        "certain_sets": s.sets().sets(),
        "queries_used": s.queries_used(),
        "iteration": s.iteration(),
        "status": status_name(s.status()),
        "created_at": h.created_at,
    });
    if let Some(truth) = s.labels() {
        let jcc = jaccard(&asg.labels, truth).map_err(internal)?;
        let vm = v_measure(&asg.labels, truth, 1.0).map_err(internal)?;
        body["metrics"] = json!({ "jcc": jcc, "v_measure": vm.v });
    }
    Ok(Json(body))
}

async fn export_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let shared = state.get(&id)?;
    let mut h = shared.lock().expect("session poisoned");
    h.touch();
    let bytes = session_file::to_bytes(&h.session, Some(&h.config));
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            (
                header::CONTENT_DISPOSITION,
                HeaderValue::from_str(&format!("attachment; filename=\"{id}.json\"")).map_err(internal)?,
            ),
        ],
        bytes,
    )
        .into_response())
}
