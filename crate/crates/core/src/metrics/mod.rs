//! Answer-level EM/F1, ranking-level nDCG, datasets and evaluation harnesses.

mod dataset;
mod eval;

use std::collections::HashMap;

use thiserror::Error;

use crate::rerank::RerankError;

pub use dataset::{load_qa_jsonl, load_squad, read_candidate_sets, write_candidate_sets, GoldAnswer, QaExample, SquadDataset};
pub use eval::{
    build_candidate_sets, evaluate_qa, evaluate_ranking, split_indices, EvalReport, ExampleRecord, QueryNdcg, Ranker,
    RankingReport,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty test split ({n} examples, split {split})")]
    EmptyTestSplit { n: usize, split: f64 },
    #[error("split must be in (0, 1), got {0}")]
    Split(f64),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

/// Lowercase, turn ASCII punctuation into spaces, drop the articles
/// a/an/the, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_punctuation() { ' ' } else { c })
        .collect();
    lowered
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact match and token F1 of one prediction against its gold answers.
/// `None` is NO_ANSWER; an empty gold list marks an unanswerable question.
pub fn em_f1(pred: Option<&str>, golds: &[String]) -> (f64, f64) {
    let pred = match (pred, golds.is_empty()) {
        (None, true) => return (1.0, 1.0),
        (None, false) | (Some(_), true) => return (0.0, 0.0),
        (Some(p), false) => normalize_answer(p),
    };
    let mut em: f64 = 0.0;
    let mut f1: f64 = 0.0;
    for gold in golds {
        let gold = normalize_answer(gold);
        if gold == pred {
            em = 1.0;
        }
        f1 = f1.max(token_f1(&pred, &gold));
    }
    (em, f1)
}

fn token_f1(pred: &str, gold: &str) -> f64 {
    let p: Vec<&str> = pred.split_whitespace().collect();
    let g: Vec<&str> = gold.split_whitespace().collect();
    if p.is_empty() || g.is_empty() {
        return if p == g { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Binary-relevance nDCG@k for a single gold document.
pub fn ndcg_at_k<S: AsRef<str>>(ranked_doc_ids: &[S], gold_doc_id: &str, k: usize) -> f64 {
    ranked_doc_ids
        .iter()
        .take(k)
        .position(|d| d.as_ref() == gold_doc_id)
        .map_or(0.0, |i| 1.0 / ((i + 2) as f64).log2())
}
