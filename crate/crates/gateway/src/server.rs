//! HTTP+JSON API.
//!
//! | method | path                          | result                          |
//! |--------|-------------------------------|---------------------------------|
//! | GET    | `/api/health`                 | `{status, docs}`                |
//! | POST   | `/api/sessions`               | 201 `{session_id}`              |
//! | GET    | `/api/sessions/{id}`          | session state                   |
//! | POST   | `/api/sessions/{id}/messages` | `{text}` → [`MessageResponse`]  |
//! | GET    | `/api/docs/{id}`              | [`DocResponse`]                 |
//!
//! Errors are `{code, message}` with a matching status. A pipeline failure
//! answers 502; the turn is still recorded in the session.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use manualqa_core::dialog::{Action, AnswerSource, DialogSession, Lexicon};
use manualqa_core::pipeline::{Pipeline, RankedAnswer};
use manualqa_core::reader::Tag;
use serde::{Deserialize, Serialize};
use tower_http::trace::TraceLayer;

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    pipeline: Arc<Pipeline>,
    lexicon: Arc<Lexicon>,
    sessions: Mutex<HashMap<String, Arc<Mutex<DialogSession>>>>,
    next_id: AtomicU64,
    snapshot: Option<PathBuf>,
}

impl AppState {
    /// Sessions are restored from `snapshot` when the file exists.
    pub fn new(pipeline: Pipeline, lexicon: Lexicon, snapshot: Option<PathBuf>) -> anyhow::Result<Self> {
        let mut sessions = HashMap::new();
        if let Some(path) = snapshot.as_ref().filter(|p| p.exists()) {
            let saved: Vec<DialogSession> = serde_json::from_slice(&std::fs::read(path)?)?;
            for s in saved {
                sessions.insert(s.session_id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        let next = sessions
            .keys()
            .filter_map(|k| k.strip_prefix("s").and_then(|n| n.parse::<u64>().ok()))
            .max()
            .map_or(1, |n| n + 1);
        Ok(Self {
            pipeline: Arc::new(pipeline),
            lexicon: Arc::new(lexicon),
            sessions: Mutex::new(sessions),
            next_id: AtomicU64::new(next),
            snapshot,
        })
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<DialogSession>>> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id}")))
    }

    fn save_snapshot(&self) {
        let Some(path) = &self.snapshot else { return };
        let table: Vec<Arc<Mutex<DialogSession>>> = self.sessions.lock().expect("session table lock").values().cloned().collect();
        let mut all: Vec<DialogSession> = table.iter().map(|s| s.lock().expect("session lock").clone()).collect();
        all.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        let tmp = path.with_extension("tmp");
        let result = serde_json::to_vec(&all)
            .map_err(std::io::Error::other)
            .and_then(|bytes| std::fs::write(&tmp, bytes))
            .and_then(|()| std::fs::rename(&tmp, path));
        if let Err(e) = result {
            tracing::warn!(path = %path.display(), error = %e, "session snapshot not written");
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/:id", get(get_session))
        .route("/api/sessions/:id/messages", post(post_message))
        .route("/api/docs/:id", get(get_doc))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

async fn health(State(st): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok", "docs": st.pipeline.index().doc_count()}))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

async fn create_session(State(st): State<Arc<AppState>>) -> (StatusCode, Json<SessionCreated>) {
    let id = format!("s{:06}", st.next_id.fetch_add(1, Ordering::Relaxed));
    st.sessions.lock().expect("session table lock").insert(id.clone(), Arc::new(Mutex::new(DialogSession::new(&id))));
    st.save_snapshot();
    (StatusCode::CREATED, Json(SessionCreated { session_id: id }))
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<DialogSession>> {
    let s = st.session(&id)?;
    let snapshot = s.lock().expect("session lock").clone();
    Ok(Json(snapshot))
}

#[derive(Debug, Deserialize)]
struct MessageRequest {
    text: String,
}

/// One ranked answer as shown to clients. `char_span` is in `norm_body`
/// chars, `display_span` the same range in display `body` chars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerView {
    pub doc_id: String,
    pub title: String,
    pub answer_text: Option<String>,
    pub char_span: Option<(usize, usize)>,
    pub display_span: Option<(usize, usize)>,
    pub retriever_score: f64,
    pub qa_score: f64,
    pub combined_score: f64,
    pub rank: usize,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageResponse {
    pub session_id: String,
    pub intent: String,
    pub confidence: f64,
    pub action: Action,
    pub reply: String,
    /// Rank of the answer the reply cites.
    pub cited_rank: Option<usize>,
    pub cursor: usize,
    pub answers: Vec<AnswerView>,
}

pub(crate) fn answer_view(pipeline: &Pipeline, a: &RankedAnswer) -> AnswerView {
    let doc = pipeline.index().doc(&a.result.doc_id);
    AnswerView {
        doc_id: a.result.doc_id.clone(),
        title: doc.map(|d| d.title.clone()).unwrap_or_default(),
        answer_text: a.answer.answer_text.clone(),
        char_span: a.answer.char_span,
        display_span: a.answer.char_span.zip(doc).map(|((s, e), d)| d.display_span(s, e)),
        retriever_score: a.result.retriever_score,
        qa_score: a.result.qa_score,
        combined_score: a.result.combined_score,
        rank: a.result.rank,
        tag: a.answer.tag,
    }
}

/// Answer source that remembers a pipeline failure so the handler can turn
/// it into a 502.
struct Recording<'a> {
    pipeline: &'a Pipeline,
    failure: Mutex<Option<String>>,
}

impl AnswerSource for Recording<'_> {
    fn answer(&self, question: &str) -> Result<Vec<RankedAnswer>, String> {
        AnswerSource::answer(self.pipeline, question).inspect_err(|e| {
            *self.failure.lock().expect("failure lock") = Some(e.clone());
        })
    }

    fn title(&self, doc_id: &str) -> Option<String> {
        AnswerSource::title(self.pipeline, doc_id)
    }
}

async fn post_message(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<MessageResponse>> {
    let req: MessageRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", format!("expected {{\"text\": ...}}: {e}")))?;
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "text must not be empty"));
    }
    let session = st.session(&id)?;
    let state = st.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let mut s = session.lock().expect("session lock");
        let source = Recording { pipeline: &state.pipeline, failure: Mutex::new(None) };
        let turn = s.handle(&req.text, &state.lexicon, &source).clone();
        let failure = source.failure.into_inner().expect("failure lock");
        let answers = s.current_results.iter().map(|a| answer_view(&state.pipeline, a)).collect();
        let response = MessageResponse {
            session_id: s.session_id.clone(),
            intent: turn.intent.name.to_string(),
            confidence: turn.intent.confidence,
            action: turn.action,
            reply: turn.reply.text,
            cited_rank: turn.reply.answer.map(|a| a.result.rank),
            cursor: s.cursor,
            answers,
        };
        drop(s);
        state.save_snapshot();
        (response, failure)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;

    match outcome {
        (_, Some(failure)) => Err(ApiError::new(StatusCode::BAD_GATEWAY, "pipeline_error", failure)),
        (response, None) => Ok(Json(response)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocResponse {
    pub doc_id: String,
    pub title: String,
    pub ata_chapter: String,
    pub applicability: String,
    pub headers: String,
    pub body: String,
    pub norm_body: String,
    /// `norm_body` char position → `body` char position, `len + 1` entries.
    pub offset_map: Vec<usize>,
}

async fn get_doc(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<DocResponse>> {
    let d = st
        .pipeline
        .index()
        .doc(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "doc_not_found", format!("no document {id}")))?;
    Ok(Json(DocResponse {
        doc_id: d.doc_id.clone(),
        title: d.title.clone(),
        ata_chapter: d.ata_chapter.clone(),
        applicability: d.applicability.clone(),
        headers: d.headers.clone(),
        body: d.body.clone(),
        norm_body: d.norm_body.clone(),
        offset_map: d.offset_map.as_slice().to_vec(),
    }))
}

/// Bind and serve until ctrl-c / SIGTERM.
pub async fn serve(state: Arc<AppState>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind port {port}: {e}"))?;
    tracing::info!(port, "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown_signal()).await?;
    tracing::info!("shut down");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
