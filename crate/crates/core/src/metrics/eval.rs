//! Evaluation harnesses: closed-document QA and held-out ranking.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{em_f1, ndcg_at_k, MetricsError, QaExample};
use crate::pipeline::{Pipeline, PipelineError};
use crate::rerank::{rerank, CandidateSet, Combiner, GbrtModel, GbrtParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub index: usize,
    pub question: String,
    pub gold_doc_id: String,
    pub golds: Vec<String>,
    /// `None` for NO_ANSWER or when the example errored.
    pub prediction: Option<String>,
    pub em: f64,
    pub f1: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub n_evaluated: usize,
    pub n_errors: usize,
    /// Percentages over evaluated examples.
    pub em: f64,
    pub f1: f64,
    pub records: Vec<ExampleRecord>,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12}{:>10}", "examples", self.n_examples);
        let _ = writeln!(s, "{:<12}{:>10}", "evaluated", self.n_evaluated);
        let _ = writeln!(s, "{:<12}{:>10}", "errors", self.n_errors);
        let _ = writeln!(s, "{:<12}{:>10.2}", "EM", self.em);
        let _ = writeln!(s, "{:<12}{:>10.2}", "F1", self.f1);
        s
    }
}

/// Run `f` over `0..n` on up to `workers` threads, results in index order.
fn par_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().expect("slot lock") = Some(v);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("slot lock").expect("slot filled")).collect()
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Closed-document QA: the reader runs on each example's gold document.
pub fn evaluate_qa(examples: &[QaExample], pipeline: &Pipeline) -> Result<EvalReport, MetricsError> {
    if examples.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let records = par_map(examples.len(), workers(), |i| {
        let ex = &examples[i];
        let golds = ex.answer_texts();
        let mut rec = ExampleRecord {
            index: i,
            question: ex.question.clone(),
            gold_doc_id: ex.gold_doc_id.clone(),
            golds: golds.clone(),
            prediction: None,
            em: 0.0,
            f1: 0.0,
            error: None,
        };
        let Some(doc) = pipeline.index().doc(&ex.gold_doc_id) else {
            rec.error = Some(format!("gold document {:?} not in index", ex.gold_doc_id));
            return rec;
        };
        if let Some(a) = ex.misplaced_answer(doc) {
            rec.error = Some(format!("answer {:?} not found at char {}", a.text, a.char_start));
            return rec;
        }
        match pipeline.read_doc(&ex.question, doc) {
            Ok(answer) => {
                let (em, f1) = em_f1(answer.answer_text.as_deref(), &golds);
                rec.prediction = answer.answer_text;
                rec.em = em;
                rec.f1 = f1;
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    });

    let ok: Vec<&ExampleRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let mean = |f: fn(&ExampleRecord) -> f64| {
        if ok.is_empty() {
            0.0
        } else {
            100.0 * ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    Ok(EvalReport {
        n_examples: examples.len(),
        n_evaluated: ok.len(),
        n_errors: examples.len() - ok.len(),
        em: mean(|r| r.em),
        f1: mean(|r| r.f1),
        records,
    })
}

/// Retrieve and read every example's question, producing candidate sets
/// (retriever order, reader confidence filled in) for re-ranker training.
pub fn build_candidate_sets(examples: &[QaExample], pipeline: &Pipeline) -> Result<Vec<CandidateSet>, PipelineError> {
    let sets = par_map(examples.len(), workers(), |i| {
        let ex = &examples[i];
        pipeline.candidates(&ex.question).map(|cands| CandidateSet {
            query_id: format!("q{i:04}"),
            question: ex.question.clone(),
            gold_doc_id: ex.gold_doc_id.clone(),
            candidates: cands.into_iter().map(|c| c.result).collect(),
        })
    });
    sets.into_iter().collect()
}

/// How candidates are ordered during ranking evaluation.
#[derive(Debug, Clone)]
pub enum Ranker {
    Fixed(Combiner),
    /// Train a boosted model on the train split.
    TrainGbrt(GbrtParams),
}

impl Ranker {
    pub fn name(&self) -> &'static str {
        match self {
            Ranker::Fixed(c) => c.name(),
            Ranker::TrainGbrt(_) => "gbrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryNdcg {
    pub query_id: String,
    pub gold_rank: Option<usize>,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub ranker: String,
    pub k: usize,
    pub split: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub mean_ndcg: f64,
    pub per_query: Vec<QueryNdcg>,
}

impl RankingReport {
    pub fn summary(&self) -> String {
        format!(
            "{:<16}{:>8}{:>8}  nDCG@{} {:.4}\n",
            self.ranker, self.n_train, self.n_test, self.k, self.mean_ndcg
        )
    }
}

/// Seeded shuffle of `0..n` cut into (train, test) at `round(split * n)`.
pub fn split_indices(n: usize, split: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), MetricsError> {
    if !(split > 0.0 && split < 1.0) {
        return Err(MetricsError::Split(split));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((split * n as f64).round() as usize).min(n);
    let test = idx.split_off(n_train);
    if test.is_empty() {
        return Err(MetricsError::EmptyTestSplit { n, split });
    }
    Ok((idx, test))
}

pub fn evaluate_ranking(
    sets: &[CandidateSet],
    ranker: &Ranker,
    split: f64,
    seed: u64,
    k: usize,
) -> Result<RankingReport, MetricsError> {
    if sets.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let (train, test) = split_indices(sets.len(), split, seed)?;
    let combiner = match ranker {
        Ranker::Fixed(c) => c.clone(),
        Ranker::TrainGbrt(params) => {
            let rows: Vec<_> = train.iter().flat_map(|&i| sets[i].training_rows()).collect();
            Combiner::Gbrt(GbrtModel::train(&rows, params)?.into())
        }
    };
    let mut per_query = Vec::with_capacity(test.len());
    for &i in &test {
        let set = &sets[i];
        let ranked = rerank(set.candidates.clone(), &combiner)?;
        let ids: Vec<&str> = ranked.iter().map(|r| r.doc_id.as_str()).collect();
        per_query.push(QueryNdcg {
            query_id: set.query_id.clone(),
            gold_rank: ids.iter().position(|d| *d == set.gold_doc_id).map(|p| p + 1),
            ndcg: ndcg_at_k(&ids, &set.gold_doc_id, k),
        });
    }
    let mean_ndcg = per_query.iter().map(|q| q.ndcg).sum::<f64>() / per_query.len() as f64;
    Ok(RankingReport {
        ranker: ranker.name().to_string(),
        k,
        split,
        seed,
        n_train: train.len(),
        n_test: test.len(),
        mean_ndcg,
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rerank::{synthetic_ranking_set, SyntheticParams};

    #[test]
    fn split_is_seeded_partition() {
        let (a, b) = split_indices(10, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut all: Vec<_> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.8, 3).unwrap(), (a, b));
        assert!(split_indices(1, 0.8, 3).is_err());
        assert!(split_indices(10, 1.0, 3).is_err());
    }

    #[test]
    fn ranking_report_deterministic() {
        let sets = synthetic_ranking_set(&SyntheticParams { queries: 40, ..Default::default() });
        let r = Ranker::TrainGbrt(GbrtParams { rounds: 20, ..Default::default() });
        let a = serde_json::to_vec(&evaluate_ranking(&sets, &r, 0.8, 1, 10).unwrap()).unwrap();
        let b = serde_json::to_vec(&evaluate_ranking(&sets, &r, 0.8, 1, 10).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
