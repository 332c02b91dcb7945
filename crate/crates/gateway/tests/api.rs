use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use manualqa_core::corpus::{ingest_dir, AbbrevTable, Normalizer, UnitRule};
use manualqa_core::dialog::Lexicon;
use manualqa_core::index::{IndexParams, InvertedIndex};
use manualqa_core::pipeline::{Pipeline, PipelineSettings};
use manualqa_core::reader::{LexicalReader, Passage, ReaderBackend, ReaderError, SpanPrediction};
use manualqa_core::rerank::Combiner;
use manualqa_gateway::server::{router, AppState, DocResponse, MessageResponse, SessionCreated};
use serde_json::{json, Value};
use tower::ServiceExt;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn fixture_index() -> Arc<InvertedIndex> {
    let normalizer = Normalizer {
        abbrevs: AbbrevTable::from_tsv(&std::fs::read_to_string(data("abbrev.tsv")).unwrap()).unwrap(),
        unit_rules: UnitRule::from_tsv(&std::fs::read_to_string(data("units.tsv")).unwrap()).unwrap(),
    };
    let docs = ingest_dir(&data("corpus"), &normalizer).unwrap().0.docs;
    Arc::new(InvertedIndex::build(docs, IndexParams::default()).unwrap())
}

fn app_with(reader: Arc<dyn ReaderBackend>, snapshot: Option<PathBuf>) -> Router {
    let pipeline = Pipeline::new(fixture_index(), reader, Combiner::ZscoreAdd, PipelineSettings::default());
    router(Arc::new(AppState::new(pipeline, Lexicon::builtin(), snapshot).unwrap()))
}

fn app() -> Router {
    app_with(Arc::new(LexicalReader::default()), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn new_session(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/api/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    serde_json::from_value::<SessionCreated>(body).unwrap().session_id
}

async fn say(app: &Router, sid: &str, text: &str) -> (StatusCode, Value) {
    call(app, "POST", &format!("/api/sessions/{sid}/messages"), Some(&json!({ "text": text }).to_string())).await
}

#[tokio::test]
async fn health_reports_corpus_size() {
    let (status, body) = call(&app(), "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok", "docs": 40}));
}

#[tokio::test]
async fn question_then_negative_feedback_walks_the_ranking() {
    let app = app();
    let sid = new_session(&app).await;

    let (status, body) = say(&app, &sid, "What is max crosswind for landing?").await;
    assert_eq!(status, StatusCode::OK);
    let first: MessageResponse = serde_json::from_value(body).unwrap();
    assert_eq!(first.intent, "question");
    assert_eq!(first.cited_rank, Some(1));
    assert_eq!(first.cursor, 0);
    let top = &first.answers[0];
    assert_eq!(top.doc_id, "LIM-01");
    assert_eq!(top.answer_text.as_deref(), Some("Max crosswind for landing: 38 kt gust included"));
    assert!(first.reply.contains("38 kt"), "{}", first.reply);
    let ranks: Vec<usize> = first.answers.iter().map(|a| a.rank).collect();
    assert_eq!(ranks, (1..=first.answers.len()).collect::<Vec<_>>());
    assert!(first.answers.windows(2).all(|w| w[0].combined_score >= w[1].combined_score));

    let (_, body) = say(&app, &sid, "no").await;
    let second: MessageResponse = serde_json::from_value(body).unwrap();
    assert_eq!(second.intent, "negative_feedback");
    assert_eq!(second.cited_rank, Some(2));
    assert_eq!(second.cursor, 1);
    assert_eq!(second.answers, first.answers);

    let (status, body) = call(&app, "GET", &format!("/api/sessions/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["history"].as_array().unwrap().len(), 2);
    assert_eq!(body["cursor"], 1);
}

#[tokio::test]
async fn display_span_highlights_the_answer_in_the_document() {
    let app = app();
    let sid = new_session(&app).await;
    let (_, body) = say(&app, &sid, "What is VFE in CONF 3?").await;
    let msg: MessageResponse = serde_json::from_value(body).unwrap();
    let top = &msg.answers[0];
    let (_, doc) = call(&app, "GET", &format!("/api/docs/{}", top.doc_id), None).await;
    let doc: DocResponse = serde_json::from_value(doc).unwrap();
    assert_eq!(doc.offset_map.len(), doc.norm_body.chars().count() + 1);

    let (s, e) = top.char_span.unwrap();
    let norm: String = doc.norm_body.chars().skip(s).take(e - s).collect();
    assert_eq!(Some(norm.as_str()), top.answer_text.as_deref());
    let (ds, de) = top.display_span.unwrap();
    assert_eq!((ds, de), (doc.offset_map[s], doc.offset_map[e]));
    let shown: String = doc.body.chars().skip(ds).take(de - ds).collect();
    assert!(shown.contains("185"), "{shown}");
}

#[tokio::test]
async fn chitchat_gets_a_template_reply() {
    let app = app();
    let sid = new_session(&app).await;
    let (status, body) = say(&app, &sid, "hello").await;
    assert_eq!(status, StatusCode::OK);
    let msg: MessageResponse = serde_json::from_value(body).unwrap();
    assert_eq!(msg.intent, "greeting");
    assert!(msg.answers.is_empty());
    assert_eq!(msg.cited_rank, None);
    assert_eq!(msg.reply, Lexicon::builtin().template("greeting").unwrap());
}

#[tokio::test]
async fn request_errors() {
    let app = app();
    let sid = new_session(&app).await;
    let uri = format!("/api/sessions/{sid}/messages");

    let (status, body) = call(&app, "POST", &uri, Some("{\"txt\": 1}")).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
    let (status, _) = call(&app, "POST", &uri, Some("not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = say(&app, &sid, "   ").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = say(&app, "s999999", "hello").await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("session_not_found")));
    let (status, body) = call(&app, "GET", "/api/sessions/nope", None).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("session_not_found")));
    let (status, body) = call(&app, "GET", "/api/docs/NOPE-99", None).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("doc_not_found")));
    let (status, body) = call(&app, "GET", "/api/nothing", None).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
}

struct Broken;

impl ReaderBackend for Broken {
    fn read(&self, _q: &str, _p: &[Passage]) -> Result<Vec<SpanPrediction>, ReaderError> {
        Err(ReaderError::Transport("connection refused".into()))
    }
}

#[tokio::test]
async fn reader_failure_is_a_bad_gateway() {
    let app = app_with(Arc::new(Broken), None);
    let sid = new_session(&app).await;
    let (status, body) = say(&app, &sid, "What is max crosswind for landing?").await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["code"], "pipeline_error");
    assert!(body["message"].as_str().unwrap().contains("connection refused"), "{body}");

    // the turn is kept and chitchat still works
    let (_, session) = call(&app, "GET", &format!("/api/sessions/{sid}"), None).await;
    assert_eq!(session["history"].as_array().unwrap().len(), 1);
    let (status, _) = say(&app, &sid, "thanks").await;
    assert_eq!(status, StatusCode::OK);
}

fn snapshot_app(path: &Path) -> Router {
    app_with(Arc::new(LexicalReader::default()), Some(path.to_path_buf()))
}

#[tokio::test]
async fn sessions_survive_a_restart_with_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.json");

    let app = snapshot_app(&path);
    let sid = new_session(&app).await;
    say(&app, &sid, "What is max crosswind for landing?").await;
    say(&app, &sid, "no").await;
    drop(app);

    let restarted = snapshot_app(&path);
    let (status, body) = call(&restarted, "GET", &format!("/api/sessions/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["cursor"], 1);
    let (_, body) = say(&restarted, &sid, "no").await;
    assert_eq!(body["cited_rank"], 3);
    assert_ne!(new_session(&restarted).await, sid);
}
