//! Client side of the reader wire protocol (HTTP + JSON, protocol 1).
//!
//! Request:
//! `{"protocol":1,"question":…,"max_answer_len":…,"passages":[{"passage_id":…,"text":…}]}`
//!
//! Response:
//! `{"protocol":1,"predictions":[{"passage_id":…,"spans":[{"start_char":…,"end_char":…,"score":…}],
//! "no_answer_score":…,"tag":"SPAN"|"NO_SPAN","tag_score":…}]}`
//!
//! Span offsets on the wire are char offsets relative to the passage text;
//! all scores must already be normalized to `[0, 1]`.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{validate_prediction, Passage, ReaderBackend, ReaderConfig, ReaderError, ScoredSpan, SpanPrediction, Tag};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Serialize)]
struct WireRequest<'a> {
    protocol: u32,
    question: &'a str,
    max_answer_len: usize,
    passages: Vec<WirePassage<'a>>,
}

#[derive(Serialize)]
struct WirePassage<'a> {
    passage_id: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct WireSpan {
    start_char: usize,
    end_char: usize,
    score: f64,
}

#[derive(Deserialize)]
struct WirePrediction {
    #[allow(dead_code)]
    passage_id: String,
    spans: Vec<WireSpan>,
    no_answer_score: f64,
    tag: Tag,
    tag_score: f64,
}

#[derive(Debug, Clone)]
pub struct RemoteReader {
    endpoint: String,
    timeout: Duration,
    config: ReaderConfig,
    agent: ureq::Agent,
}

impl RemoteReader {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

    pub fn new(endpoint: &str, timeout: Duration, config: ReaderConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { endpoint: endpoint.to_string(), timeout, config, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn classify(&self, err: ureq::Error) -> ReaderError {
        match err {
            ureq::Error::Status(code, _) => ReaderError::Transport(format!("{} answered HTTP {code}", self.endpoint)),
            ureq::Error::Transport(t) => {
                if is_timeout(&t) {
                    ReaderError::Timeout(self.timeout.as_millis() as u64)
                } else {
                    ReaderError::Transport(t.to_string())
                }
            }
        }
    }
}

fn is_timeout(t: &ureq::Transport) -> bool {
    let mut source: Option<&(dyn std::error::Error + 'static)> = std::error::Error::source(t);
    while let Some(err) = source {
        if let Some(io) = err.downcast_ref::<std::io::Error>() {
            if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) {
                return true;
            }
        }
        source = err.source();
    }
    t.to_string().contains("timed out")
}

impl ReaderBackend for RemoteReader {
    fn read(&self, question: &str, passages: &[Passage]) -> Result<Vec<SpanPrediction>, ReaderError> {
        if passages.is_empty() {
            return Ok(Vec::new());
        }
        let request = WireRequest {
            protocol: PROTOCOL_VERSION,
            question,
            max_answer_len: self.config.max_answer_len,
            passages: passages.iter().map(|p| WirePassage { passage_id: &p.passage_id, text: &p.text }).collect(),
        };
        let response = self.agent.post(&self.endpoint).send_json(&request).map_err(|e| self.classify(e))?;
        let body: Value = response.into_json().map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut || e.kind() == std::io::ErrorKind::WouldBlock {
                ReaderError::Timeout(self.timeout.as_millis() as u64)
            } else {
                ReaderError::Backend { passage_id: "*".into(), message: format!("unreadable response: {e}") }
            }
        })?;
        parse_response(body, passages, self.config.n_best)
    }
}

/// Validate a protocol response against the passages that were sent.
pub(crate) fn parse_response(
    body: Value,
    passages: &[Passage],
    n_best: usize,
) -> Result<Vec<SpanPrediction>, ReaderError> {
    let whole = |message: String| ReaderError::Backend { passage_id: "*".into(), message };
    match body.get("protocol").and_then(Value::as_u64) {
        Some(v) if v == PROTOCOL_VERSION as u64 => {}
        other => return Err(whole(format!("unsupported protocol {other:?}"))),
    }
    let items = body
        .get("predictions")
        .and_then(Value::as_array)
        .ok_or_else(|| whole("missing predictions array".into()))?;

    let by_id: HashMap<&str, &Passage> = passages.iter().map(|p| (p.passage_id.as_str(), p)).collect();
    let mut got: HashMap<&str, SpanPrediction> = HashMap::new();
    for (i, item) in items.iter().enumerate() {
        let id = item
            .get("passage_id")
            .and_then(Value::as_str)
            .ok_or_else(|| ReaderError::Backend { passage_id: format!("<prediction {i}>"), message: "missing passage_id".into() })?;
        let fail = |message: String| ReaderError::Backend { passage_id: id.to_string(), message };
        let &passage = by_id.get(id).ok_or_else(|| fail("unknown passage_id".into()))?;
        let wire: WirePrediction = serde_json::from_value(item.clone()).map_err(|e| fail(e.to_string()))?;
        let len = passage.text.chars().count();
        let mut spans = Vec::with_capacity(wire.spans.len());
        for s in wire.spans {
            if s.end_char > len || s.start_char >= s.end_char {
                return Err(fail(format!("span [{}, {}) outside passage of length {len}", s.start_char, s.end_char)));
            }
            spans.push(ScoredSpan {
                start: passage.char_start + s.start_char,
                end: passage.char_start + s.end_char,
                score: s.score,
            });
        }
        let pred = SpanPrediction {
            passage_id: passage.passage_id.clone(),
            doc_id: passage.doc_id.clone(),
            spans,
            no_answer_score: wire.no_answer_score,
            tag: wire.tag,
            tag_score: wire.tag_score,
        };
        let pred = validate_prediction(pred, passage, n_best)?;
        if got.insert(passage.passage_id.as_str(), pred).is_some() {
            return Err(fail("duplicate prediction".into()));
        }
    }

    passages
        .iter()
        .map(|p| {
            got.remove(p.passage_id.as_str()).ok_or_else(|| ReaderError::Backend {
                passage_id: p.passage_id.clone(),
                message: format!("missing prediction for {}", p.passage_id),
            })
        })
        .collect()
}
