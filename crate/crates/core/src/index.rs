//! Field-aware inverted index with BM25F ranking.
//!
//! Per-field term frequencies are length-normalized and weighted *before*
//! saturation:
//!
//! ```text
//! tf~(t,d)  = Σ_f w_f · tf(t,f,d) / (1 + b_f · (len_f(d) / avglen_f − 1))
//! score     = Σ_t idf(t) · tf~ / (k1 + tf~)
//! idf(t)    = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProcedureDoc;
use crate::text::analyze;

const INDEX_FORMAT: &str = "manualqa-index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate doc_id {0}")]
    DuplicateDocId(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("unknown doc_id {0}")]
    UnknownDoc(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("index file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Title,
    Headers,
    NormBody,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::Title, Field::Headers, Field::NormBody];

    fn slot(self) -> usize {
        self as usize
    }

    fn text(self, doc: &ProcedureDoc) -> &str {
        match self {
            Field::Title => &doc.title,
            Field::Headers => &doc.headers,
            Field::NormBody => &doc.norm_body,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub field: Field,
    pub weight: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub k1: f64,
    pub fields: Vec<FieldParams>,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            k1: 1.2,
            fields: vec![
                FieldParams { field: Field::Title, weight: 2.0, b: 0.75 },
                FieldParams { field: Field::Headers, weight: 1.5, b: 0.75 },
                FieldParams { field: Field::NormBody, weight: 1.0, b: 0.75 },
            ],
        }
    }
}

impl IndexParams {
    /// Score a single field only (weight 1).
    pub fn single_field(field: Field, k1: f64, b: f64) -> Self {
        Self { k1, fields: vec![FieldParams { field, weight: 1.0, b }] }
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(IndexError::Params(format!("k1 must be > 0, got {}", self.k1)));
        }
        for f in &self.fields {
            if !(0.0..=1.0).contains(&f.b) {
                return Err(IndexError::Params(format!("b for {:?} must be in [0,1], got {}", f.field, f.b)));
            }
            if !(f.weight >= 0.0 && f.weight.is_finite()) {
                return Err(IndexError::Params(format!("weight for {:?} must be >= 0", f.field)));
            }
        }
        if !self.fields.iter().any(|f| f.weight > 0.0) {
            return Err(IndexError::Params("at least one field weight must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    /// Term frequency per field, indexed like [`Field::ALL`].
    pub tf: [u32; 3],
}

/// A retrieved (and possibly re-ranked) document candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub doc_id: String,
    pub retriever_score: f64,
    #[serde(default)]
    pub qa_score: f64,
    #[serde(default)]
    pub combined_score: f64,
    /// 1-based.
    #[serde(default)]
    pub rank: usize,
}

/// Frozen index. Built once, then shared read-only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertedIndex {
    format: String,
    version: u32,
    params: IndexParams,
    docs: Vec<ProcedureDoc>,
    postings: BTreeMap<String, Vec<Posting>>,
    field_lengths: Vec<[u32; 3]>,
    #[serde(skip)]
    avg_len: [f64; 3],
    #[serde(skip)]
    by_id: HashMap<String, u32>,
}

impl InvertedIndex {
    pub fn build(corpus: Vec<ProcedureDoc>, params: IndexParams) -> Result<Self, IndexError> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        let mut by_id = HashMap::with_capacity(corpus.len());
        for (i, doc) in corpus.iter().enumerate() {
            if by_id.insert(doc.doc_id.clone(), i as u32).is_some() {
                return Err(IndexError::DuplicateDocId(doc.doc_id.clone()));
            }
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut field_lengths = Vec::with_capacity(corpus.len());
        for (i, doc) in corpus.iter().enumerate() {
            let mut counts: BTreeMap<String, [u32; 3]> = BTreeMap::new();
            let mut lens = [0u32; 3];
            for field in Field::ALL {
                let toks = analyze(field.text(doc));
                lens[field.slot()] = toks.len() as u32;
                // unscored fields stay out of the postings, so df ignores them too
                if !params.fields.iter().any(|f| f.field == field && f.weight > 0.0) {
                    continue;
                }
                for t in toks {
                    counts.entry(t).or_default()[field.slot()] += 1;
                }
            }
            field_lengths.push(lens);
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting { doc: i as u32, tf });
            }
        }

        let mut index = Self {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            params,
            docs: corpus,
            postings,
            field_lengths,
            avg_len: [0.0; 3],
            by_id,
        };
        index.compute_averages();
        Ok(index)
    }

    fn compute_averages(&mut self) {
        let n = self.field_lengths.len() as f64;
        for f in Field::ALL {
            let total: u64 = self.field_lengths.iter().map(|l| l[f.slot()] as u64).sum();
            self.avg_len[f.slot()] = total as f64 / n;
        }
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn docs(&self) -> &[ProcedureDoc] {
        &self.docs
    }

    pub fn doc(&self, doc_id: &str) -> Option<&ProcedureDoc> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i as usize])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn field_length(&self, doc_id: &str, field: Field) -> Option<u32> {
        self.by_id.get(doc_id).map(|&i| self.field_lengths[i as usize][field.slot()])
    }

    pub fn avg_field_length(&self, field: Field) -> f64 {
        self.avg_len[field.slot()]
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25F score of one document for the given (already analyzed) terms.
    /// Repeated query terms count once.
    pub fn bm25f_score(&self, query_terms: &[String], doc_id: &str) -> Result<f64, IndexError> {
        let &doc = self.by_id.get(doc_id).ok_or_else(|| IndexError::UnknownDoc(doc_id.to_string()))?;
        let unique: BTreeSet<&str> = query_terms.iter().map(String::as_str).collect();
        Ok(unique.into_iter().map(|t| self.term_score(t, doc)).sum())
    }

    fn term_score(&self, term: &str, doc: u32) -> f64 {
        let Some(list) = self.postings.get(term) else { return 0.0 };
        let Ok(pos) = list.binary_search_by_key(&doc, |p| p.doc) else { return 0.0 };
        let posting = list[pos];
        let lens = &self.field_lengths[doc as usize];
        let mut tf_tilde = 0.0;
        for fp in &self.params.fields {
            let s = fp.field.slot();
            let tf = posting.tf[s];
            if tf == 0 || fp.weight == 0.0 {
                continue;
            }
            let norm = 1.0 + fp.b * (lens[s] as f64 / self.avg_len[s] - 1.0);
            tf_tilde += fp.weight * tf as f64 / norm;
        }
        if tf_tilde == 0.0 {
            return 0.0;
        }
        self.idf(term) * tf_tilde / (self.params.k1 + tf_tilde)
    }

    /// Top-`k` documents for a free-text question. Zero-score documents are
    /// dropped; ties go to the smaller doc_id.
    pub fn search(&self, question: &str, k: usize) -> Vec<RankedResult> {
        let terms = analyze(question);
        if terms.is_empty() || k == 0 {
            return Vec::new();
        }
        let candidates: BTreeSet<u32> =
            terms.iter().flat_map(|t| self.postings(t).iter().map(|p| p.doc)).collect();

        let unique: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
        let mut scored: Vec<(f64, &str)> = candidates
            .into_iter()
            .map(|d| (unique.iter().map(|t| self.term_score(t, d)).sum::<f64>(), self.docs[d as usize].doc_id.as_str()))
            .filter(|(s, _)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.truncate(k);
        scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, id))| RankedResult {
                doc_id: id.to_string(),
                retriever_score: score,
                qa_score: 0.0,
                combined_score: score,
                rank: i + 1,
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let io_err = |source| IndexError::Io { path: path.display().to_string(), source };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| IndexError::Format(e.to_string()))?;
        w.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let io_err = |source| IndexError::Io { path: path.display().to_string(), source };
        let file = std::fs::File::open(path).map_err(io_err)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, IndexError> {
        let mut index: Self = serde_json::from_reader(reader).map_err(|e| IndexError::Format(e.to_string()))?;
        if index.format != INDEX_FORMAT || index.version != INDEX_VERSION {
            return Err(IndexError::Format(format!("unsupported index {} v{}", index.format, index.version)));
        }
        if index.docs.is_empty() || index.field_lengths.len() != index.docs.len() {
            return Err(IndexError::Format("doc store and length table disagree".into()));
        }
        index.params.validate()?;
        for (i, doc) in index.docs.iter().enumerate() {
            if index.by_id.insert(doc.doc_id.clone(), i as u32).is_some() {
                return Err(IndexError::DuplicateDocId(doc.doc_id.clone()));
            }
        }
        let n = index.docs.len() as u32;
        if index.postings.values().flatten().any(|p| p.doc >= n) {
            return Err(IndexError::Format("posting references a missing document".into()));
        }
        index.compute_averages();
        Ok(index)
    }

    /// Human-readable postings: `term<TAB>df<TAB>doc:title,headers,body ...`.
    pub fn dump_terms<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (term, list) in &self.postings {
            write!(out, "{term}\t{}", list.len())?;
            for p in list {
                let id = &self.docs[p.doc as usize].doc_id;
                write!(out, "\t{id}:{},{},{}", p.tf[0], p.tf[1], p.tf[2])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, title: &str, body: &str) -> ProcedureDoc {
        ProcedureDoc::plain(id, title, body)
    }

    fn corpus() -> Vec<ProcedureDoc> {
        vec![
            doc("P1", "Landing Gear", "gravity extension of the landing gear"),
            doc("P2", "Crosswind", "max crosswind for landing 38 kt"),
            doc("P3", "APU start", "start the apu before engine start"),
        ]
    }

    #[test]
    fn counts_documents_and_frequencies() {
        let idx = InvertedIndex::build(corpus(), IndexParams::default()).unwrap();
        assert_eq!(idx.doc_count(), 3);
        assert_eq!(idx.doc_freq("landing"), 2);
        let p = idx.postings("gear");
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].tf, [1, 0, 1]);
        assert_eq!(idx.postings("landing")[0].tf[Field::Title.slot()], 1);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let mut c = corpus();
        c.push(doc("P1", "again", "x"));
        let err = InvertedIndex::build(c, IndexParams::default()).unwrap_err();
        assert_eq!(err.to_string(), "duplicate doc_id P1");
    }

    #[test]
    fn worked_single_doc_score() {
        let idx = InvertedIndex::build(vec![doc("D", "", "flaps")], IndexParams::single_field(Field::NormBody, 1.2, 0.0))
            .unwrap();
        let s = idx.bm25f_score(&["flaps".into()], "D").unwrap();
        let idf = (1.0f64 + 0.5 / 1.5).ln();
        assert!((idf - 0.287682).abs() < 1e-6);
        assert!((s - 0.130765).abs() < 1e-6, "{s}");
        assert!((s - idf / 2.2).abs() < 1e-12);
    }

    #[test]
    fn unscored_fields_do_not_count_toward_df() {
        let docs = vec![doc("A", "flaps", "slats"), doc("B", "", "flaps")];
        let idx = InvertedIndex::build(docs, IndexParams::single_field(Field::NormBody, 1.2, 0.75)).unwrap();
        assert_eq!(idx.doc_freq("flaps"), 1);
        assert_eq!(idx.bm25f_score(&["flaps".into()], "A").unwrap(), 0.0);
    }

    #[test]
    fn absent_terms_score_zero() {
        let idx = InvertedIndex::build(corpus(), IndexParams::default()).unwrap();
        assert_eq!(idx.bm25f_score(&["hydraulic".into()], "P1").unwrap(), 0.0);
        assert!(matches!(idx.bm25f_score(&[], "nope"), Err(IndexError::UnknownDoc(_))));
    }

    #[test]
    fn identical_docs_tie_and_break_by_id() {
        let c = vec![doc("B", "t", "same words"), doc("A", "t", "same words")];
        let idx = InvertedIndex::build(c, IndexParams::default()).unwrap();
        let r = idx.search("same", 5);
        assert_eq!(r[0].retriever_score, r[1].retriever_score);
        assert_eq!(r[0].doc_id, "A");
    }

    #[test]
    fn search_excludes_zero_scores() {
        let idx = InvertedIndex::build(corpus(), IndexParams::default()).unwrap();
        let r = idx.search("apu", 5);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].rank, 1);
        assert!(idx.search("???", 5).is_empty());
    }

    #[test]
    fn repeated_query_terms_count_once() {
        let idx = InvertedIndex::build(corpus(), IndexParams::default()).unwrap();
        let once = idx.bm25f_score(&["apu".into()], "P3").unwrap();
        let twice = idx.bm25f_score(&["apu".into(), "apu".into()], "P3").unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn averages_match_lengths() {
        let idx = InvertedIndex::build(corpus(), IndexParams::default()).unwrap();
        let mean = [6.0, 6.0, 6.0].iter().sum::<f64>() / 3.0;
        assert!((idx.avg_field_length(Field::NormBody) - mean).abs() < 1e-9);
        assert_eq!(idx.avg_field_length(Field::Headers), 0.0);
    }

    #[test]
    fn params_validation() {
        let p = IndexParams { k1: 0.0, ..IndexParams::default() };
        assert!(p.validate().is_err());
        let mut p = IndexParams::default();
        p.fields[0].b = 1.5;
        assert!(p.validate().is_err());
        let mut p = IndexParams::default();
        p.fields.iter_mut().for_each(|f| f.weight = 0.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let idx = InvertedIndex::build(corpus(), IndexParams::default()).unwrap();
        let bytes = serde_json::to_vec(&idx).unwrap();
        let back = InvertedIndex::from_reader(&bytes[..]).unwrap();
        assert_eq!(back.search("landing gear", 3), idx.search("landing gear", 3));
        let mut dump = Vec::new();
        back.dump_terms(&mut dump).unwrap();
        let dump = String::from_utf8(dump).unwrap();
        assert!(dump.lines().any(|l| l == "gear\t1\tP1:1,0,1"));
    }
}
