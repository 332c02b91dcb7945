//! Deterministic lexical-overlap reader, the offline stand-in for a
//! fine-tuned span extractor.
//!
//! Candidates are token windows of at most `max_answer_len` tokens that stay
//! inside one clause (clauses end at `.`, `;`, `!`, `?` or a line break) and
//! neither start nor end on punctuation. A candidate scores the fraction of
//! the question's content terms it contains; windows longer than half of
//! `max_answer_len` are damped by `sqrt(free / len)`. Among equal scores the
//! longer window wins (it carries the text around the matched terms), then
//! the earlier one.

use std::collections::BTreeSet;

use super::{Passage, ReaderBackend, ReaderConfig, ReaderError, ScoredSpan, SpanPrediction, Tag};
use crate::text::{tokenize, tokenize_chars, Token};

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "am", "an", "and", "any", "are", "as", "at", "be", "been", "before", "being",
    "by", "can", "could", "did", "do", "does", "during", "for", "from", "had", "has", "have", "how", "i", "if",
    "in", "into", "is", "it", "its", "me", "must", "my", "of", "on", "or", "our", "shall", "should", "so",
    "than", "that", "the", "their", "them", "then", "there", "these", "this", "those", "to", "us", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your",
];

const CLAUSE_ENDS: &[&str] = &[".", ";", "!", "?"];

/// Lowercased, de-duplicated non-stopword word/number tokens.
pub fn content_terms(question: &str) -> BTreeSet<String> {
    tokenize(question)
        .into_iter()
        .filter(|t| !t.is_punct())
        .map(|t| t.text.to_lowercase())
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct LexicalReader {
    pub config: ReaderConfig,
}

impl LexicalReader {
    pub fn new(config: ReaderConfig) -> Self {
        Self { config }
    }

    pub fn read_passage(&self, question: &str, passage: &Passage) -> SpanPrediction {
        let terms = content_terms(question);
        let tokens = tokenize_chars(&passage.text.chars().collect::<Vec<_>>(), passage.char_start);
        let mut spans = if terms.is_empty() { Vec::new() } else { self.candidates(&terms, &tokens) };
        spans.sort_by(|a, b| {
            b.0.score
                .total_cmp(&a.0.score)
                .then(b.1.cmp(&a.1))
                .then(a.0.start.cmp(&b.0.start))
        });
        spans.truncate(self.config.n_best);

        let best = spans.first().map_or(0.0, |s| s.0.score);
        let threshold = self.config.tag_threshold;
        let (tag, tag_score) = if best > threshold {
            (Tag::Span, (best - threshold) / (1.0 - threshold))
        } else {
            (Tag::NoSpan, (threshold - best) / threshold)
        };
        SpanPrediction {
            passage_id: passage.passage_id.clone(),
            doc_id: passage.doc_id.clone(),
            spans: spans.into_iter().map(|(s, _)| s).collect(),
            no_answer_score: 1.0 - best,
            tag,
            tag_score: tag_score.clamp(0.0, 1.0),
        }
    }

    /// Every admissible window with at least one matched term, paired with
    /// its token length.
    fn candidates(&self, terms: &BTreeSet<String>, tokens: &[Token]) -> Vec<(ScoredSpan, usize)> {
        let max_len = self.config.max_answer_len.max(1);
        let free = (max_len / 2).max(1);
        let lowered: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let mut out = Vec::new();

        for clause in clauses(tokens) {
            for i in clause.clone() {
                if tokens[i].is_punct() {
                    continue;
                }
                let mut seen = BTreeSet::new();
                for j in i..clause.end.min(i + max_len) {
                    if terms.contains(&lowered[j]) {
                        seen.insert(lowered[j].as_str());
                    }
                    if tokens[j].is_punct() || seen.is_empty() {
                        continue;
                    }
                    let len = j - i + 1;
                    let coverage = seen.len() as f64 / terms.len() as f64;
                    let damp = if len <= free { 1.0 } else { (free as f64 / len as f64).sqrt() };
                    out.push((ScoredSpan { start: tokens[i].start, end: tokens[j].end, score: coverage * damp }, len));
                }
            }
        }
        out
    }
}

fn clauses(tokens: &[Token]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.after_newline && i > start {
            out.push(start..i);
            start = i;
        }
        if t.is_punct() && CLAUSE_ENDS.contains(&t.text.as_str()) {
            if i > start {
                out.push(start..i);
            }
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(start..tokens.len());
    }
    out
}

impl ReaderBackend for LexicalReader {
    fn read(&self, question: &str, passages: &[Passage]) -> Result<Vec<SpanPrediction>, ReaderError> {
        Ok(passages.iter().map(|p| self.read_passage(question, p)).collect())
    }
}
