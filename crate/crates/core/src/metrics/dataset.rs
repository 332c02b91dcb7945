//! QA dataset formats: the JSONL example format, SQuAD 2.0 JSON, and JSONL
//! candidate sets for ranking.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::corpus::ProcedureDoc;
use crate::rerank::CandidateSet;
use crate::text::char_slice;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub text: String,
    /// Char offset into the gold document's `norm_body`.
    pub char_start: usize,
}

/// One question. No answers means the question is unanswerable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub question: String,
    #[serde(default)]
    pub gold_doc_id: String,
    #[serde(default)]
    pub answers: Vec<GoldAnswer>,
}

impl QaExample {
    pub fn is_unanswerable(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn answer_texts(&self) -> Vec<String> {
        self.answers.iter().map(|a| a.text.clone()).collect()
    }

    /// The first answer whose text is not found at its offset in `doc`.
    pub fn misplaced_answer(&self, doc: &ProcedureDoc) -> Option<&GoldAnswer> {
        self.answers.iter().find(|a| {
            let end = a.char_start + a.text.chars().count();
            char_slice(&doc.norm_body, a.char_start, end) != a.text
        })
    }
}

fn io_err(path: &Path, source: std::io::Error) -> MetricsError {
    MetricsError::Io { path: path.display().to_string(), source }
}

fn open(path: &Path) -> Result<BufReader<File>, MetricsError> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| MetricsError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn load_qa_jsonl(path: &Path) -> Result<Vec<QaExample>, MetricsError> {
    let examples: Vec<QaExample> = jsonl(path)?;
    if let Some(i) = examples.iter().position(|e| e.question.trim().is_empty()) {
        return Err(MetricsError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: "empty question".into(),
        });
    }
    Ok(examples)
}

pub fn read_candidate_sets(path: &Path) -> Result<Vec<CandidateSet>, MetricsError> {
    jsonl(path)
}

pub fn write_candidate_sets<W: Write>(sets: &[CandidateSet], mut out: W) -> std::io::Result<()> {
    for s in sets {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// A SQuAD 2.0 file flattened into one document per paragraph.
#[derive(Debug, Clone)]
pub struct SquadDataset {
    pub docs: Vec<ProcedureDoc>,
    pub examples: Vec<QaExample>,
}

#[derive(Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Deserialize)]
struct SquadArticle {
    #[serde(default)]
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Deserialize)]
struct SquadQa {
    question: String,
    #[serde(default)]
    answers: Vec<SquadAnswer>,
    #[serde(default)]
    is_impossible: bool,
}

#[derive(Deserialize)]
struct SquadAnswer {
    text: String,
    answer_start: usize,
}

pub fn load_squad(path: &Path) -> Result<SquadDataset, MetricsError> {
    let file: SquadFile = serde_json::from_reader(open(path)?).map_err(|e| MetricsError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut docs = Vec::new();
    let mut examples = Vec::new();
    for (a, article) in file.data.into_iter().enumerate() {
        for (p, para) in article.paragraphs.into_iter().enumerate() {
            let doc_id = format!("squad-{a}-{p}");
            for qa in para.qas {
                let answers = if qa.is_impossible {
                    Vec::new()
                } else {
                    qa.answers.into_iter().map(|x| GoldAnswer { text: x.text, char_start: x.answer_start }).collect()
                };
                examples.push(QaExample { question: qa.question, gold_doc_id: doc_id.clone(), answers });
            }
            docs.push(ProcedureDoc::plain(&doc_id, &article.title, &para.context));
        }
    }
    Ok(SquadDataset { docs, examples })
}
