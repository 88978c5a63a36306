//! HTTP session service.
//!
//! Commands against one session run one at a time in arrival order: each
//! session sits behind a fair async mutex, and events are broadcast while it
//! is held. A stream subscriber first receives the backlog and then live
//! events, so what any client sees is a prefix of the log.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use fireball_core::dice::DieSource;
use fireball_core::engine::{turn_banner, Engine, ExecutionReport};
use fireball_core::evalkit::{Predictor, PredictorError};
use fireball_core::eventlog::{Event, EventLog, EventLogError, Session};
use fireball_core::fixtures::{combat, load_combat};
use fireball_core::promptgen::render_utt2cmd;
use fireball_core::statecore::{CombatState, CombatStatus};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::{broadcast, Mutex, RwLock};

use crate::stamp;

pub const DM_ID: &str = "dm";
const CHANNEL_CAPACITY: usize = 1024;

/// A live session.
#[derive(Debug)]
pub struct SessionHandle {
    pub id: String,
    pub session: Session,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

struct Slot {
    handle: Mutex<SessionHandle>,
    tx: broadcast::Sender<Event>,
}

pub struct AppState {
    engine: Engine,
    data_dir: Option<PathBuf>,
    predictor: Arc<dyn Predictor + Send + Sync>,
    seed: u64,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(engine: Engine, data_dir: Option<PathBuf>, predictor: Arc<dyn Predictor + Send + Sync>, seed: u64) -> Self {
        AppState {
            engine,
            data_dir,
            predictor,
            seed,
            sessions: RwLock::new(HashMap::new()),
        }
    }
}

/// Error body: a machine-readable `error` and a human `message`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub message: String,
}

pub struct Failure(StatusCode, ApiError);

impl Failure {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Failure(status, ApiError { error: error.into(), message: message.into() })
    }

    fn not_found(id: &str) -> Self {
        Failure::new(StatusCode::NOT_FOUND, "SessionNotFound", format!("no session '{id}'"))
    }
}

impl From<EventLogError> for Failure {
    fn from(e: EventLogError) -> Self {
        Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "LogFailure", e.to_string())
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<T, Failure>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/commands", post(post_command))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/events", get(events))
        .route("/v1/suggest", post(suggest))
        .with_state(state)
}

async fn slot(state: &AppState, id: &str) -> ApiResult<Arc<Slot>> {
    state.sessions.read().await.get(id).cloned().ok_or_else(|| Failure::not_found(id))
}

/// A bundled combat by name, or an inline combat document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureRef {
    Named(String),
    Inline(Value),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub fixture: FixtureRef,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<(StatusCode, Json<Created>)> {
    let mut state = match &req.fixture {
        FixtureRef::Named(name) => combat(name)
            .ok_or_else(|| Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "UnknownFixture", format!("no bundled combat '{name}'")))?,
        FixtureRef::Inline(doc) => {
            load_combat(doc).map_err(|e| Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidFixture", e.to_string()))?
        }
    };
    state.rng = DieSource::seeded(req.seed.unwrap_or(app.seed));
    let id = uuid::Uuid::new_v4().simple().to_string();
    let log = match &app.data_dir {
        Some(dir) => EventLog::open(dir, id.clone())?,
        None => EventLog::in_memory(id.clone()),
    };
    let now = Utc::now();
    let session = Session::start(app.engine.clone(), log, DM_ID, state, now)?;
    let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
    let slot = Slot {
        handle: Mutex::new(SessionHandle { id: id.clone(), session, created: now, updated: now }),
        tx,
    };
    app.sessions.write().await.insert(id.clone(), Arc::new(slot));
    Ok((StatusCode::CREATED, Json(Created { session_id: id })))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub status: CombatStatus,
    pub round: u32,
    pub actors: Vec<String>,
    #[serde(default)]
    pub turn_banner: Option<String>,
    pub state: CombatState,
    /// Number of events recorded so far.
    pub events: u64,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

fn view(h: &SessionHandle) -> SessionView {
    let s = &h.session.state;
    SessionView {
        session_id: h.id.clone(),
        status: s.status,
        round: s.round,
        actors: s.actor_lines(),
        turn_banner: turn_banner(s).ok(),
        state: s.clone(),
        events: h.session.log.events().len() as u64,
        created: h.created,
        updated: h.updated,
    }
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let slot = slot(&app, &id).await?;
    let h = slot.handle.lock().await;
    Ok(Json(view(&h)))
}

/// Sends events recorded since `from` to stream subscribers. Called with the
/// session locked.
fn publish(slot: &Slot, h: &SessionHandle, from: usize) {
    for e in &h.session.log.events()[from..] {
        // No receivers is fine.
        let _ = slot.tx.send(e.clone());
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandRequest {
    pub text: String,
    #[serde(default = "default_author")]
    pub author_id: String,
    /// Acting combatant; the current turn when absent.
    #[serde(default)]
    pub caster: Option<String>,
}

fn default_author() -> String {
    "player".into()
}

async fn post_command(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<CommandRequest>,
) -> ApiResult<Json<ExecutionReport>> {
    let slot = slot(&app, &id).await?;
    let mut h = slot.handle.lock().await;
    let from = h.session.log.events().len();
    let at = stamp(&h.session.log);
    let outcome = h.session.command(at, &req.author_id, req.caster.as_deref(), &req.text)?;
    h.updated = at;
    publish(&slot, &h, from);
    outcome
        .map(Json)
        .map_err(|e| Failure::new(StatusCode::UNPROCESSABLE_ENTITY, e.reason(), e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MessageRequest {
    #[serde(default = "default_author")]
    pub author_id: String,
    #[serde(default)]
    pub author_name: Option<String>,
    pub content: String,
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<MessageRequest>,
) -> ApiResult<Json<Event>> {
    let slot = slot(&app, &id).await?;
    let mut h = slot.handle.lock().await;
    let from = h.session.log.events().len();
    let at = stamp(&h.session.log);
    let name = req.author_name.clone().unwrap_or_else(|| req.author_id.clone());
    h.session.message(at, &req.author_id, &name, &req.content)?;
    h.updated = at;
    publish(&slot, &h, from);
    Ok(Json(h.session.log.events()[from].clone()))
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EventsQuery {
    /// First sequence number to send.
    #[serde(default)]
    pub from: Option<u64>,
}

fn sse_event(e: &Event) -> SseEvent {
    SseEvent::default()
        .id(e.seq.to_string())
        .event(e.body.type_name())
        .json_data(e)
        .expect("events serialize")
}

/// Backlog from `from` (or just after `Last-Event-ID`), then live events.
async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|s| s + 1);
    let from = resume.or(q.from).unwrap_or(0);
    let slot = slot(&app, &id).await?;
    let (backlog, rx) = {
        let h = slot.handle.lock().await;
        let backlog: Vec<Event> = h.session.log.events().iter().filter(|e| e.seq >= from).cloned().collect();
        (backlog, slot.tx.subscribe())
    };
    let mut next = backlog.last().map_or(from, |e| e.seq + 1);
    let live = stream::unfold(rx, |mut rx| async move {
        match rx.recv().await {
            Ok(e) => Some((e, rx)),
            // A lagging client is cut off; it can resume with Last-Event-ID.
            Err(_) => None,
        }
    })
    .filter(move |e| {
        let keep = e.seq >= next;
        if keep {
            next = e.seq + 1;
        }
        std::future::ready(keep)
    });
    let all = stream::iter(backlog).chain(live).map(|e| Ok(sse_event(&e)));
    Ok(Sse::new(all).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuggestRequest {
    pub session_id: String,
    pub roleplay_text: String,
    /// Acting combatant; the current turn when absent.
    #[serde(default)]
    pub caster: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Suggestion {
    pub command: String,
    pub prompt: String,
}

async fn suggest(State(app): State<Arc<AppState>>, Json(req): Json<SuggestRequest>) -> ApiResult<Json<Suggestion>> {
    let slot = slot(&app, &req.session_id).await?;
    let prompt = {
        let h = slot.handle.lock().await;
        let state = &h.session.state;
        let caster = match &req.caster {
            Some(c) => state.get(c).ok_or_else(|| {
                Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "CasterNotFound", format!("no combatant named '{c}'"))
            })?,
            None => state
                .current()
                .ok_or_else(|| Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "NoCombatants", "there are no combatants"))?,
        };
        render_utt2cmd(state, caster, std::slice::from_ref(&req.roleplay_text))
    };
    let predictor = app.predictor.clone();
    let p = prompt.clone();
    let out = tokio::task::spawn_blocking(move || predictor.predict(&p, 0))
        .await
        .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "PredictorPanicked", e.to_string()))?;
    match out {
        Ok(command) => Ok(Json(Suggestion { command, prompt })),
        Err(e @ PredictorError::Unavailable(_)) => {
            Err(Failure::new(StatusCode::SERVICE_UNAVAILABLE, "PredictorUnavailable", e.to_string()))
        }
        Err(e @ PredictorError::UnknownPrompt) => Err(Failure::new(StatusCode::SERVICE_UNAVAILABLE, "NoSuggestion", e.to_string())),
    }
}

/// Serves until ctrl-c.
pub async fn serve(app: Arc<AppState>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
