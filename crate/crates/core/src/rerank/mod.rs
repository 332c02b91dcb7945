//! Score fusion: combine retriever and reader scores into one re-ranking
//! score.

mod gbrt;
mod synthetic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::RankedResult;

pub use gbrt::{GbrtModel, GbrtParams, Node, Tree, FEATURE_NAMES};
pub use synthetic::{synthetic_ranking_set, SyntheticParams};

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("row {row}: non-finite feature {feature}")]
    NonFinite { row: usize, feature: &'static str },
    #[error("row {row}: label {label} is not 0 or 1")]
    Label { row: usize, label: f64 },
    #[error("no training rows")]
    Empty,
    #[error("model file: {0}")]
    Model(String),
    #[error("unknown ranker {0:?}")]
    UnknownRanker(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One query's candidate list with its gold document, the unit of
/// re-ranker training and ranking evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_id: String,
    #[serde(default)]
    pub question: String,
    pub gold_doc_id: String,
    /// In retriever order.
    pub candidates: Vec<RankedResult>,
}

impl CandidateSet {
    /// Training rows: label 1 for the gold document, 0 otherwise.
    pub fn training_rows(&self) -> Vec<(CandidateFeatures, f64)> {
        CandidateFeatures::for_candidates(&self.candidates)
            .into_iter()
            .zip(&self.candidates)
            .map(|(f, c)| (f, if c.doc_id == self.gold_doc_id { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// The four combiner inputs for one candidate. z-scores are relative to the
/// candidate set of the same query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateFeatures {
    pub retriever_raw: f64,
    pub qa_raw: f64,
    pub retriever_z: f64,
    pub qa_z: f64,
}

impl CandidateFeatures {
    pub fn to_array(&self) -> [f64; 4] {
        [self.retriever_raw, self.qa_raw, self.retriever_z, self.qa_z]
    }

    /// Features for a whole candidate set, z-scores computed over it.
    pub fn for_candidates(results: &[RankedResult]) -> Vec<Self> {
        if results.is_empty() {
            return Vec::new();
        }
        let r: Vec<f64> = results.iter().map(|c| c.retriever_score).collect();
        let q: Vec<f64> = results.iter().map(|c| c.qa_score).collect();
        let rz = zscores(&r);
        let qz = zscores(&q);
        (0..results.len())
            .map(|i| Self { retriever_raw: r[i], qa_raw: q[i], retriever_z: rz[i], qa_z: qz[i] })
            .collect()
    }
}

/// Standardize with the population standard deviation; a constant input
/// maps to all zeros.
pub fn zscores(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    // a constant vector can leave rounding noise in the variance
    if sd == 0.0 || sd <= 1e-12 * mean.abs() {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - mean) / sd).collect()
}

pub fn combine_multiply(f: &CandidateFeatures) -> f64 {
    f.retriever_raw * f.qa_raw
}

pub fn combine_zscore_add(f: &CandidateFeatures) -> f64 {
    f.retriever_z + f.qa_z
}

#[derive(Debug, Clone)]
pub enum Combiner {
    RetrieverOnly,
    QaOnly,
    Multiply,
    ZscoreAdd,
    Gbrt(Arc<GbrtModel>),
}

impl Combiner {
    pub fn name(&self) -> &'static str {
        match self {
            Combiner::RetrieverOnly => "retriever_only",
            Combiner::QaOnly => "qa_only",
            Combiner::Multiply => "multiply",
            Combiner::ZscoreAdd => "zscore_add",
            Combiner::Gbrt(_) => "gbrt",
        }
    }

    /// Parse a fixed combiner name (`gbrt` needs a model, see [`Combiner::Gbrt`]).
    pub fn from_name(name: &str) -> Result<Self, RerankError> {
        Ok(match name {
            "retriever_only" => Combiner::RetrieverOnly,
            "qa_only" => Combiner::QaOnly,
            "multiply" => Combiner::Multiply,
            "zscore_add" => Combiner::ZscoreAdd,
            other => return Err(RerankError::UnknownRanker(other.to_string())),
        })
    }

    pub fn score(&self, f: &CandidateFeatures) -> Result<f64, RerankError> {
        Ok(match self {
            Combiner::RetrieverOnly => f.retriever_raw,
            Combiner::QaOnly => f.qa_raw,
            Combiner::Multiply => combine_multiply(f),
            Combiner::ZscoreAdd => combine_zscore_add(f),
            Combiner::Gbrt(model) => model.predict(f)?,
        })
    }
}

/// Re-sort one query's candidates by combined score. Ties keep the original
/// retriever order; ranks are reassigned from 1.
pub fn rerank(results: Vec<RankedResult>, combiner: &Combiner) -> Result<Vec<RankedResult>, RerankError> {
    let features = CandidateFeatures::for_candidates(&results);
    let mut keyed = Vec::with_capacity(results.len());
    for (pos, (mut r, f)) in results.into_iter().zip(&features).enumerate() {
        r.combined_score = combiner.score(f)?;
        keyed.push((r.rank, pos, r));
    }
    keyed.sort_by(|a, b| b.2.combined_score.total_cmp(&a.2.combined_score).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    Ok(keyed
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, mut r))| {
            r.rank = i + 1;
            r
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn result(id: &str, r: f64, q: f64, rank: usize) -> RankedResult {
        RankedResult { doc_id: id.into(), retriever_score: r, qa_score: q, combined_score: r, rank }
    }

    #[test]
    fn zscore_examples() {
        assert_eq!(zscores(&[5.0, 5.0, 5.0]), [0.0, 0.0, 0.0]);
        assert_eq!(zscores(&[7.0]), [0.0]);
        assert!(close(&zscores(&[1.0, 2.0, 3.0]), &[-1.224745, 0.0, 1.224745], 1e-6));
        let exact = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!(close(&zscores(&[1.0, 2.0, 3.0]), &[-exact, 0.0, exact], 1e-12));
        assert_eq!(zscores(&[0.1, 0.1, 0.1]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn simple_combiners() {
        let f = CandidateFeatures { retriever_raw: 3.2, qa_raw: 0.5, retriever_z: -1.224745, qa_z: 1.224745 };
        assert!((combine_multiply(&f) - 1.6).abs() < 1e-12);
        assert_eq!(combine_zscore_add(&f), 0.0);
        let zero = CandidateFeatures { qa_raw: 0.0, ..f };
        assert_eq!(combine_multiply(&zero), 0.0);
        let bm = CandidateFeatures { retriever_raw: 0.287682, qa_raw: 1.0, ..f };
        assert_eq!(combine_multiply(&bm), 0.287682);
    }

    #[test]
    fn single_candidate_zscore_is_zero() {
        let f = CandidateFeatures::for_candidates(&[result("a", 4.0, 0.3, 1)]);
        assert_eq!(combine_zscore_add(&f[0]), 0.0);
    }

    #[test]
    fn retriever_only_keeps_order() {
        let input = vec![result("a", 5.0, 0.1, 1), result("b", 4.0, 0.9, 2), result("c", 1.0, 0.5, 3)];
        let out = rerank(input.clone(), &Combiner::RetrieverOnly).unwrap();
        let ids: Vec<_> = out.iter().map(|r| r.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        let out = rerank(input, &Combiner::QaOnly).unwrap();
        let ids: Vec<_> = out.iter().map(|r| r.doc_id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
        assert_eq!(out.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn equal_scores_keep_retriever_order() {
        let input = vec![result("a", 5.0, 0.0, 1), result("b", 4.0, 0.0, 2), result("c", 1.0, 0.0, 3)];
        let out = rerank(input, &Combiner::Multiply).unwrap();
        let ids: Vec<_> = out.iter().map(|r| r.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn names_round_trip() {
        for n in ["retriever_only", "qa_only", "multiply", "zscore_add"] {
            assert_eq!(Combiner::from_name(n).unwrap().name(), n);
        }
        assert!(Combiner::from_name("xgboost").is_err());
    }
}
