//! HTTP and WebSocket API.
//!
//! Session operations block on provider calls, so handlers run them on the
//! blocking pool.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use stepflow_core::compose::{ComposeError, FinalDraft};
use stepflow_core::memory::FactSource;
use stepflow_core::qa::{QaError, TaskKind};
use uuid::Uuid;

use crate::events::ServerEvent;
use crate::host::{HostError, SessionHost, SharedSession};
use crate::ledger::{Phase, TimerSnapshot};
use crate::session::{Effect, Session, SessionError, TranscriptOutcome};
use crate::store::StoreError;

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

fn session_status(e: &SessionError) -> StatusCode {
    match e {
        SessionError::Qa(QaError::Provider(_))
        | SessionError::Compose(ComposeError::Provider { .. })
        | SessionError::Provider(_) => StatusCode::BAD_GATEWAY,
        SessionError::Qa(_) | SessionError::Compose(_) | SessionError::Invalid(_) => StatusCode::BAD_REQUEST,
        SessionError::Phase(_) => StatusCode::CONFLICT,
        SessionError::Segment(_) => StatusCode::BAD_REQUEST,
        SessionError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<HostError> for ApiError {
    fn from(e: HostError) -> Self {
        let status = match &e {
            HostError::Store(StoreError::NotFound(_)) => StatusCode::NOT_FOUND,
            HostError::Session(s) => session_status(s),
            HostError::Provider(_) => StatusCode::BAD_GATEWAY,
            HostError::Store(_) | HostError::Setup(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        Self::new(session_status(&e), e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;
type AppState = Arc<SessionHost>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn parse_id(id: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(id).map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("session {id} not found")))
}

fn lookup(host: &SessionHost, id: &str) -> ApiResult<SharedSession> {
    Ok(host.session(parse_id(id)?)?)
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub task_kind: TaskKind,
    #[serde(default)]
    pub original_text: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuestionView {
    pub id: u64,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub id: Uuid,
    pub first_question: QuestionView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session: Session,
    pub phase: Phase,
    pub timers: TimerSnapshot,
    pub active_question: Option<QuestionView>,
}

#[derive(Debug, Deserialize)]
pub struct TranscriptBody {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptReply {
    pub outcome: TranscriptOutcome,
    pub events: Vec<ServerEvent>,
}

#[derive(Debug, Deserialize)]
pub struct EditorBody {
    pub text: String,
    #[serde(default, rename = "final")]
    pub finalize: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EditorReply {
    pub phase: Phase,
    pub timers: TimerSnapshot,
}

#[derive(Debug, Deserialize)]
pub struct FactBody {
    pub key: String,
    pub value: String,
}

pub fn router(host: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/commands", get(commands))
        .route("/memory", get(memory_get).post(memory_put))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/transcript", post(transcript))
        .route("/sessions/{id}/editor", post(editor))
        .route("/sessions/{id}/draft", get(draft))
        .route("/sessions/{id}/audio/{key}", get(audio))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(host)
}

async fn commands(State(host): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], host.registry().to_json()).into_response()
}

async fn memory_get(State(host): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let store = host.memory().ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "memory store not configured"))?;
    Ok(Json(serde_json::to_value(store.snapshot()).expect("memory serializes")))
}

async fn memory_put(State(host): State<AppState>, Json(body): Json<FactBody>) -> ApiResult<StatusCode> {
    let store = host.memory().ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "memory store not configured"))?;
    store
        .put_fact(&body.key, &body.value, FactSource::UserDeclared)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn create_session(
    State(host): State<AppState>,
    Json(body): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<CreatedSession>)> {
    blocking(move || {
        let shared = host.create_session(body.task_kind, body.original_text.as_deref())?;
        let mut live = shared.lock();
        live.take_events();
        let q = live
            .state
            .graph
            .pending()
            .ok_or_else(|| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "session started without a question"))?;
        let created = CreatedSession { id: live.state.id, first_question: QuestionView { id: q.id, text: q.question.clone() } };
        Ok((StatusCode::CREATED, Json(created)))
    })
    .await
}

async fn get_session(State(host): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    blocking(move || {
        let shared = lookup(&host, &id)?;
        let live = shared.lock();
        Ok(Json(SessionView {
            session: live.state.clone(),
            phase: live.state.phase(),
            timers: live.timers(),
            active_question: live
                .state
                .graph
                .active()
                .map(|t| QuestionView { id: t.id, text: t.question.clone() }),
        }))
    })
    .await
}

async fn transcript(
    State(host): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<TranscriptBody>,
) -> ApiResult<Json<TranscriptReply>> {
    blocking(move || {
        let shared = lookup(&host, &id)?;
        let mut live = shared.lock();
        let outcome = live.handle_transcript(&body.text);
        let events = live.take_events();
        Ok(Json(TranscriptReply { outcome: outcome?, events }))
    })
    .await
}

async fn editor(
    State(host): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<EditorBody>,
) -> ApiResult<Json<EditorReply>> {
    blocking(move || {
        let shared = lookup(&host, &id)?;
        let mut live = shared.lock();
        let effect = live.save_editor(&body.text, body.finalize)?;
        live.take_events();
        if let Effect::Rejected { reason } = effect {
            return Err(ApiError::new(StatusCode::CONFLICT, reason));
        }
        Ok(Json(EditorReply { phase: live.state.phase(), timers: live.timers() }))
    })
    .await
}

async fn draft(State(host): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<FinalDraft>> {
    blocking(move || {
        let shared = lookup(&host, &id)?;
        let live = shared.lock();
        live.state.draft.clone().map(Json).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no draft yet"))
    })
    .await
}

async fn audio(State(host): State<AppState>, Path((id, key)): Path<(String, String)>) -> ApiResult<Response> {
    lookup(&host, &id)?;
    let entry = host.tts().peek(&key).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "audio not cached"))?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], entry.audio.to_vec()).into_response())
}

/// Client text frames: transcripts typed or recognized client-side.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ClientFrame {
    Transcript { text: String },
}

async fn stream(
    State(host): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let shared = {
        let host = host.clone();
        blocking(move || lookup(&host, &id)).await?
    };
    Ok(ws.on_upgrade(move |socket| pump(socket, shared)))
}

async fn pump(mut socket: WebSocket, shared: SharedSession) {
    let mut rx = shared.lock().subscribe();
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let Some(Ok(msg)) = incoming else { break };
                let session = shared.clone();
                let work = match msg {
                    Message::Binary(bytes) => tokio::task::spawn_blocking(move || {
                        let mut live = session.lock();
                        let r = live.feed_audio(&bytes).map(|_| ());
                        live.take_events();
                        r
                    }),
                    Message::Text(text) => match serde_json::from_str::<ClientFrame>(&text) {
                        Ok(ClientFrame::Transcript { text }) => tokio::task::spawn_blocking(move || {
                            let mut live = session.lock();
                            let r = live.handle_transcript(&text).map(|_| ());
                            live.take_events();
                            r
                        }),
                        Err(e) => {
                            let frame = ServerEvent::error(format!("bad frame: {e}"));
                            let text = serde_json::to_string(&frame).expect("event serializes");
                            if socket.send(Message::Text(text.into())).await.is_err() {
                                break;
                            }
                            continue;
                        }
                    },
                    Message::Close(_) => break,
                    _ => continue,
                };
                // Failures were already pushed to subscribers as error frames.
                let _ = work.await;
            }
            event = rx.recv() => {
                match event {
                    Ok(event) => {
                        let text = serde_json::to_string(&event).expect("event serializes");
                        if socket.send(Message::Text(text.into())).await.is_err() {
                            break;
                        }
                    }
                    Err(tokio::sync::broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(_) => break,
                }
            }
        }
    }
}

pub async fn serve(host: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(&host.config().bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(host)).await
}
