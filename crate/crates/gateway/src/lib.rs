//! HTTP sessions over econsim episodes.
//!
//! Each session wraps one [`Episode`] behind its own async mutex, so
//! requests to the same session run strictly one after another while
//! different sessions proceed in parallel. Every record an episode appends
//! is mirrored to `{trace_dir}/{session_id}.jsonl` when a trace directory is
//! configured.

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use econsim::action::{codes, ActionCall};
use econsim::{EnvKind, Episode, EpisodeConfig, StepOutcome};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use tokio::sync::Mutex;

pub const DEFAULT_PORT: u16 = 8787;
pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);
pub const PORT_ENV: &str = "ECONSIM_PORT";
pub const TRACE_DIR_ENV: &str = "ECONSIM_TRACE_DIR";

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub trace_dir: Option<PathBuf>,
    /// Idle time after which a session is dropped.
    pub ttl: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            trace_dir: None,
            ttl: DEFAULT_TTL,
        }
    }
}

impl GatewayConfig {
    /// Reads the trace directory from the environment.
    pub fn from_env() -> Self {
        Self {
            trace_dir: std::env::var_os(TRACE_DIR_ENV).map(PathBuf::from),
            ..Self::default()
        }
    }
}

struct Session {
    episode: Episode,
    last_activity: Instant,
    /// Records already written to the trace file.
    persisted: usize,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: GatewayConfig,
    sessions: std::sync::Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(config: GatewayConfig) -> Self {
        if let Some(dir) = &config.trace_dir {
            if let Err(e) = std::fs::create_dir_all(dir) {
                log::error!("cannot create trace directory {}: {e}", dir.display());
            }
        }
        Self {
            inner: Arc::new(Inner {
                config,
                sessions: std::sync::Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.lock().expect("session map poisoned").len()
    }

    fn insert(&self, id: String, session: Session) {
        self.inner
            .sessions
            .lock()
            .expect("session map poisoned")
            .insert(id, Arc::new(Mutex::new(session)));
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.inner
            .sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    /// Locks a live session, dropping it instead if it sat idle too long.
    async fn open(&self, id: &str) -> Result<tokio::sync::OwnedMutexGuard<Session>, ApiError> {
        let guard = self.lookup(id)?.lock_owned().await;
        if guard.last_activity.elapsed() > self.inner.config.ttl {
            drop(guard);
            self.inner.sessions.lock().expect("session map poisoned").remove(id);
            return Err(ApiError::not_found(id));
        }
        Ok(guard)
    }

    /// Drops every idle session. Busy sessions are skipped.
    pub fn sweep_expired(&self) -> usize {
        let ttl = self.inner.config.ttl;
        let mut map = self.inner.sessions.lock().expect("session map poisoned");
        let before = map.len();
        map.retain(|_, s| match s.try_lock() {
            Ok(s) => s.last_activity.elapsed() <= ttl,
            Err(_) => true,
        });
        before - map.len()
    }

    fn persist(&self, id: &str, session: &mut Session) {
        let Some(dir) = &self.inner.config.trace_dir else { return };
        let path = dir.join(format!("{id}.jsonl"));
        let fresh = &session.episode.records()[session.persisted..];
        if fresh.is_empty() {
            return;
        }
        let written = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| {
                let mut buf = String::new();
                for r in fresh {
                    buf.push_str(&r.to_json_line());
                    buf.push('\n');
                }
                f.write_all(buf.as_bytes())
            });
        match written {
            Ok(()) => session.persisted = session.episode.records().len(),
            Err(e) => log::error!("trace write to {} failed: {e}", path.display()),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({"error": code, "message": message.into()}),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"))
    }

    fn terminated(ep: &Episode) -> Self {
        let mut e = Self::new(
            StatusCode::CONFLICT,
            codes::TERMINATED,
            format!("episode already ended ({})", ep.status().label()),
        );
        e.body["status"] = json!(ep.status());
        e
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/action", post(post_action))
        .route("/sessions/{id}/task_done", post(post_task_done))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/trace", get(get_trace))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    env: String,
    seed: u64,
    #[serde(default)]
    horizon_days: Option<u32>,
    #[serde(default)]
    daily_budget: Option<u32>,
    #[serde(default)]
    params: Option<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAction {
    tool: String,
    #[serde(default)]
    args: Option<Value>,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))
}

fn progress(ep: &Episode) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("day".into(), json!(ep.day()));
    m.insert("remaining_budget".into(), json!(ep.remaining_budget()));
    m.insert("terminated".into(), json!(!ep.is_running()));
    m.insert("status".into(), json!(ep.status()));
    m.insert("metric".into(), ep.metric_snapshot());
    m
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateBody = parse_body(&body)?;
    let env: EnvKind = req
        .env
        .parse()
        .map_err(|e: econsim::ConfigError| ApiError::new(StatusCode::BAD_REQUEST, "unknown_env", e.to_string()))?;
    let mut config = EpisodeConfig::new(env, req.seed);
    if let Some(h) = req.horizon_days {
        config = config.with_horizon(h);
    }
    if let Some(b) = req.daily_budget {
        config = config.with_budget(b);
    }
    if let Some(p) = req.params {
        config = config.with_params(p);
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let episode =
        Episode::new(config, id.clone()).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_params", e.to_string()))?;
    let mut body = progress(&episode);
    body.insert("session_id".into(), json!(id));
    body.insert("env".into(), json!(env));
    body.insert("budget".into(), json!(episode.budget().daily_budget));
    body.insert("horizon_days".into(), json!(episode.config().horizon_days));
    body.insert("first_observation".into(), episode.last_observation().clone());
    body.insert("tools".into(), json!(episode.tool_schemas()));
    let mut session = Session {
        episode,
        last_activity: Instant::now(),
        persisted: 0,
    };
    app.persist(&id, &mut session);
    app.insert(id.clone(), session);
    log::info!("session {id} created for {env}");
    app.sweep_expired();
    Ok((StatusCode::CREATED, Json(Value::Object(body))).into_response())
}

fn day_end_body(ep: &Episode, report: Value) -> Map<String, Value> {
    let mut body = progress(ep);
    body.insert("daily_report".into(), report);
    body
}

async fn post_action(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let mut session = app.open(&id).await?;
    session.last_activity = Instant::now();
    if !session.episode.is_running() {
        return Err(ApiError::terminated(&session.episode));
    }
    let wire: WireAction = parse_body(&body)?;
    let call = ActionCall::new(wire.tool, wire.args.unwrap_or_else(|| json!({})));
    let outcome = session.episode.act(&call);
    app.persist(&id, &mut session);
    let ep = &session.episode;
    let (status, body) = match outcome {
        StepOutcome::Terminated => return Err(ApiError::terminated(ep)),
        StepOutcome::Applied(result) => {
            let mut b = progress(ep);
            b.insert("result".into(), result);
            (StatusCode::OK, b)
        }
        StepOutcome::Rejected(e) => {
            let mut b = progress(ep);
            b.insert("error".into(), json!(e.code));
            b.insert("message".into(), json!(e.message));
            (StatusCode::OK, b)
        }
        StepOutcome::Violation(e) => {
            let mut b = progress(ep);
            b.insert("error".into(), json!(e.code));
            b.insert("message".into(), json!(e.message));
            (StatusCode::UNPROCESSABLE_ENTITY, b)
        }
        StepOutcome::DayEnded { report, forced: true } => {
            let mut b = day_end_body(ep, report);
            b.insert("error".into(), json!(codes::BUDGET_EXHAUSTED));
            b.insert(
                "message".into(),
                json!("daily action budget exhausted; the day was ended and the action was not executed"),
            );
            b.insert("day_advanced".into(), json!(true));
            (StatusCode::TOO_MANY_REQUESTS, b)
        }
        StepOutcome::DayEnded { report, forced: false } => (StatusCode::OK, day_end_body(ep, report)),
    };
    Ok((status, Json(Value::Object(body))).into_response())
}

async fn post_task_done(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let mut session = app.open(&id).await?;
    session.last_activity = Instant::now();
    let outcome = session.episode.task_done();
    app.persist(&id, &mut session);
    match outcome {
        StepOutcome::DayEnded { report, .. } => {
            let mut body = day_end_body(&session.episode, report);
            if !session.episode.is_running() {
                body.insert("final_metric".into(), json!(session.episode.final_metric()));
            }
            Ok(Json(Value::Object(body)).into_response())
        }
        _ => Err(ApiError::terminated(&session.episode)),
    }
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.open(&id).await?;
    let mut body = session.episode.visible_state();
    body["session_id"] = json!(id);
    body["terminated"] = json!(!session.episode.is_running());
    Ok(Json(body).into_response())
}

async fn get_trace(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = app.open(&id).await?;
    let mut out = String::new();
    for r in session.episode.records() {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

/// Serves until the listener fails. Idle sessions are swept hourly.
pub async fn serve(listener: tokio::net::TcpListener, config: GatewayConfig) -> std::io::Result<()> {
    let state = AppState::new(config);
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(3600));
        loop {
            tick.tick().await;
            let n = sweeper.sweep_expired();
            if n > 0 {
                log::info!("dropped {n} idle sessions");
            }
        }
    });
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and serves on a fresh multi-threaded runtime.
pub fn run_blocking(addr: SocketAddr, config: GatewayConfig) -> std::io::Result<()> {
    serve_std(std::net::TcpListener::bind(addr)?, config)
}

/// Serves on an already bound std listener, blocking the calling thread.
/// Binding port 0 first lets callers learn the address before serving.
pub fn serve_std(listener: std::net::TcpListener, config: GatewayConfig) -> std::io::Result<()> {
    listener.set_nonblocking(true)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        serve(listener, config).await
    })
}
