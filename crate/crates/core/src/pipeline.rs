//! Retriever → reader → re-ranker composition.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProcedureDoc;
use crate::index::{InvertedIndex, RankedResult};
use crate::reader::{aggregate_answer, window_passages, DocAnswer, ReaderBackend, ReaderError};
use crate::rerank::{rerank, Combiner, RerankError};
use crate::text::tokenize;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("all {count} candidates failed; last error: {last}")]
    AllCandidatesFailed { count: usize, last: ReaderError },
    #[error(transparent)]
    Reader(#[from] ReaderError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    /// Candidates taken from the retriever.
    pub k: usize,
    pub max_seq_len: usize,
    pub stride: usize,
    /// Concurrent reader calls.
    pub in_flight: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self { k: 10, max_seq_len: 512, stride: 128, in_flight: 8 }
    }
}

/// A candidate document with its aggregated answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub result: RankedResult,
    pub answer: DocAnswer,
}

pub struct Pipeline {
    index: Arc<InvertedIndex>,
    reader: Arc<dyn ReaderBackend>,
    combiner: Combiner,
    settings: PipelineSettings,
}

impl Pipeline {
    pub fn new(
        index: Arc<InvertedIndex>,
        reader: Arc<dyn ReaderBackend>,
        combiner: Combiner,
        settings: PipelineSettings,
    ) -> Self {
        Self { index, reader, combiner, settings }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn settings(&self) -> &PipelineSettings {
        &self.settings
    }

    pub fn combiner(&self) -> &Combiner {
        &self.combiner
    }

    /// Window one document for the question, read every passage, aggregate.
    pub fn read_doc(&self, question: &str, doc: &ProcedureDoc) -> Result<DocAnswer, ReaderError> {
        let q_len = tokenize(question).len();
        let passages = window_passages(doc, q_len, self.settings.max_seq_len, self.settings.stride)?;
        if passages.is_empty() {
            return Ok(DocAnswer {
                doc_id: doc.doc_id.clone(),
                answer_text: None,
                char_span: None,
                qa_score: 1.0,
                best_span_score: 0.0,
                tag: crate::reader::Tag::NoSpan,
                tag_score: 1.0,
            });
        }
        let preds = self.reader.read(question, &passages)?;
        aggregate_answer(&preds, doc)
    }

    /// Retrieve and read, in retriever order. Candidates whose read fails are
    /// dropped with a warning; if every candidate fails the call fails.
    pub fn candidates(&self, question: &str) -> Result<Vec<RankedAnswer>, PipelineError> {
        let hits = self.index.search(question, self.settings.k);
        if hits.is_empty() {
            return Ok(Vec::new());
        }
        let count = hits.len();
        let outcomes = self.read_all(question, &hits);

        let mut out = Vec::with_capacity(count);
        let mut last = None;
        for (mut hit, outcome) in hits.into_iter().zip(outcomes) {
            match outcome {
                Ok(answer) => {
                    hit.qa_score = answer.best_span_score;
                    out.push(RankedAnswer { result: hit, answer });
                }
                Err(e) => {
                    tracing::warn!(doc_id = %hit.doc_id, error = %e, "reader failed, candidate dropped");
                    last = Some(e);
                }
            }
        }
        match (out.is_empty(), last) {
            (true, Some(last)) => Err(PipelineError::AllCandidatesFailed { count, last }),
            _ => Ok(out),
        }
    }

    /// Full pipeline: candidates re-ranked by the configured combiner.
    pub fn answer(&self, question: &str) -> Result<Vec<RankedAnswer>, PipelineError> {
        let cands = self.candidates(question)?;
        let (results, mut answers): (Vec<_>, Vec<_>) = cands.into_iter().map(|c| (c.result, Some(c.answer))).unzip();
        let order: Vec<String> = results.iter().map(|r| r.doc_id.clone()).collect();
        let reranked = rerank(results, &self.combiner)?;
        Ok(reranked
            .into_iter()
            .map(|r| {
                let i = order.iter().position(|id| *id == r.doc_id).expect("reranked id comes from input");
                RankedAnswer { answer: answers[i].take().expect("each id once"), result: r }
            })
            .collect())
    }

    fn read_all(&self, question: &str, hits: &[RankedResult]) -> Vec<Result<DocAnswer, ReaderError>> {
        let read_one = |hit: &RankedResult| {
            let doc = self.index.doc(&hit.doc_id).expect("search returns stored docs");
            self.read_doc(question, doc)
        };
        let workers = self.settings.in_flight.clamp(1, hits.len());
        if workers == 1 {
            return hits.iter().map(read_one).collect();
        }

        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<DocAnswer, ReaderError>>>> = hits.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= hits.len() {
                        break;
                    }
                    let r = read_one(&hits[i]);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("every slot filled")).collect()
    }
}
