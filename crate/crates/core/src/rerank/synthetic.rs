//! Generator for synthetic ranking sets with a known gold document per query.
//!
//! Queries alternate between two regimes:
//!
//! * reader-led: the gold document gets the top reader score (high
//!   confidence) while its retriever score is drawn like everyone else's;
//! * retriever-led: the gold document gets the top retriever score by a
//!   clear gap, while every reader score, gold included, is low-confidence
//!   noise.
//!
//! Neither raw signal nor their z-score sum ranks both regimes well; a
//! learned combiner can tell them apart from the raw reader confidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CandidateSet;
use crate::index::RankedResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub queries: usize,
    pub candidates: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self { queries: 200, candidates: 10, seed: 7 }
    }
}

pub fn synthetic_ranking_set(params: &SyntheticParams) -> Vec<CandidateSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.candidates.max(2);
    (0..params.queries)
        .map(|q| {
            let reader_led = q % 2 == 0;
            let gold = rng.gen_range(0..n);
            let mut retriever: Vec<f64> = (0..n).map(|_| rng.gen_range(2.0..12.0)).collect();
            let mut qa: Vec<f64> = if reader_led {
                (0..n).map(|_| rng.gen_range(0.0..0.7)).collect()
            } else {
                (0..n).map(|_| rng.gen_range(0.0..0.6)).collect()
            };
            if reader_led {
                qa[gold] = rng.gen_range(0.8..1.0);
            } else {
                let top = retriever.iter().enumerate().filter(|&(i, _)| i != gold).map(|(_, &s)| s).fold(0.0, f64::max);
                retriever[gold] = top + rng.gen_range(1.0..4.0);
            }

            let mut cands: Vec<RankedResult> = (0..n)
                .map(|i| RankedResult {
                    doc_id: format!("q{q:03}-d{i}"),
                    retriever_score: retriever[i],
                    qa_score: qa[i],
                    combined_score: retriever[i],
                    rank: 0,
                })
                .collect();
            cands.sort_by(|a, b| b.retriever_score.total_cmp(&a.retriever_score).then(a.doc_id.cmp(&b.doc_id)));
            for (i, c) in cands.iter_mut().enumerate() {
                c.rank = i + 1;
            }
            CandidateSet {
                query_id: format!("q{q:03}"),
                question: String::new(),
                gold_doc_id: format!("q{q:03}-d{gold}"),
                candidates: cands,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rerank::CandidateFeatures;

    #[test]
    fn regimes_hold() {
        let sets = synthetic_ranking_set(&SyntheticParams::default());
        assert_eq!(sets.len(), 200);
        for (q, set) in sets.iter().enumerate() {
            let f = CandidateFeatures::for_candidates(&set.candidates);
            let g = set.candidates.iter().position(|c| c.doc_id == set.gold_doc_id).unwrap();
            let max_q = f.iter().map(|x| x.qa_z).fold(f64::MIN, f64::max);
            let max_r = f.iter().map(|x| x.retriever_z).fold(f64::MIN, f64::max);
            if q % 2 == 0 {
                assert_eq!(f[g].qa_z, max_q);
            } else {
                assert_eq!(f[g].retriever_z, max_r);
                assert_eq!(set.candidates[0].doc_id, set.gold_doc_id);
            }
        }
    }

    #[test]
    fn seeded() {
        let p = SyntheticParams::default();
        assert_eq!(synthetic_ranking_set(&p), synthetic_ranking_set(&p));
        let other = SyntheticParams { seed: 8, ..p };
        assert_ne!(synthetic_ranking_set(&p), synthetic_ranking_set(&other));
    }
}
