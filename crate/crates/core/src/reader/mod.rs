//! Extractive reading: passage windowing, reader backends and the
//! passage-to-document aggregation rules.
//!
//! Every score crossing this module's boundary lives in `[0, 1]`. Span
//! offsets in [`SpanPrediction`] and [`DocAnswer`] are char offsets into the
//! document's `norm_body`.

mod aggregate;
mod instance;
mod lexical;
mod remote;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate_answer, aggregate_tag};
pub use instance::{
    decode_span, encode_training_instance, instances_for_example, token_id, TrainingInstance, CLS_ID, PAD_ID,
    SEP_ID, VOCAB_SIZE,
};
pub use lexical::{content_terms, LexicalReader};
pub use remote::{RemoteReader, PROTOCOL_VERSION};
pub use window::{window_passages, SPECIAL_TOKENS};

#[derive(Debug, Error)]
pub enum ReaderError {
    #[error("question too long: passage budget {budget} does not exceed stride {stride}")]
    QuestionTooLong { budget: usize, stride: usize },
    #[error("reader transport failure: {0}")]
    Transport(String),
    #[error("reader timed out after {0} ms")]
    Timeout(u64),
    #[error("reader backend error for {passage_id}: {message}")]
    Backend { passage_id: String, message: String },
    #[error("{0}")]
    Contract(String),
}

impl ReaderError {
    /// Transport failures and timeouts may succeed on retry.
    pub fn is_retriable(&self) -> bool {
        matches!(self, ReaderError::Transport(_) | ReaderError::Timeout(_))
    }
}

/// Classification-head tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "SPAN")]
    Span,
    #[serde(rename = "NO_SPAN")]
    NoSpan,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Span => "SPAN",
            Tag::NoSpan => "NO_SPAN",
        }
    }
}

/// A token window over a document's `norm_body`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    /// Position of this window within its document.
    pub ordinal: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub token_count: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// One passage's reader output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub passage_id: String,
    pub doc_id: String,
    /// Sorted by score, best first.
    pub spans: Vec<ScoredSpan>,
    pub no_answer_score: f64,
    pub tag: Tag,
    pub tag_score: f64,
}

impl SpanPrediction {
    pub fn best_span(&self) -> Option<&ScoredSpan> {
        self.spans.first()
    }
}

/// Document-level answer. `answer_text` and `char_span` are `None` for
/// NO_ANSWER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocAnswer {
    pub doc_id: String,
    pub answer_text: Option<String>,
    pub char_span: Option<(usize, usize)>,
    pub qa_score: f64,
    /// Highest span score seen in any passage, answer or not. This is the
    /// reader confidence used for re-ranking.
    pub best_span_score: f64,
    pub tag: Tag,
    pub tag_score: f64,
}

impl DocAnswer {
    pub fn is_no_answer(&self) -> bool {
        self.answer_text.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReaderConfig {
    pub max_answer_len: usize,
    pub n_best: usize,
    pub tag_threshold: f64,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        Self { max_answer_len: 30, n_best: 5, tag_threshold: 0.25 }
    }
}

/// Anything that turns (question, passages) into one prediction per passage.
pub trait ReaderBackend: Send + Sync {
    fn read(&self, question: &str, passages: &[Passage]) -> Result<Vec<SpanPrediction>, ReaderError>;
}

/// Check a prediction against its passage and the reader contract, sorting
/// and trimming spans to `n_best`.
pub(crate) fn validate_prediction(
    mut pred: SpanPrediction,
    passage: &Passage,
    n_best: usize,
) -> Result<SpanPrediction, ReaderError> {
    let fail = |message: String| ReaderError::Backend { passage_id: passage.passage_id.clone(), message };
    let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
    if !unit(pred.no_answer_score) {
        return Err(fail(format!("no_answer_score {} outside [0,1]", pred.no_answer_score)));
    }
    if !unit(pred.tag_score) {
        return Err(fail(format!("tag_score {} outside [0,1]", pred.tag_score)));
    }
    for s in &pred.spans {
        if s.start >= s.end || s.start < passage.char_start || s.end > passage.char_end {
            return Err(fail(format!(
                "span [{}, {}) outside passage range [{}, {})",
                s.start, s.end, passage.char_start, passage.char_end
            )));
        }
        if !unit(s.score) {
            return Err(fail(format!("span score {} outside [0,1]", s.score)));
        }
    }
    pred.spans.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.start.cmp(&b.start)).then(a.end.cmp(&b.end)));
    pred.spans.truncate(n_best);
    Ok(pred)
}
