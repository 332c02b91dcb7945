//! Manual ingestion: procedure extraction, text normalization and the
//! JSONL corpus format.

mod normalize;
mod parse;
mod table;

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normalize::{normalize_text, AbbrevTable, Normalizer, OffsetMap, UnitRule};
pub use parse::parse_source;
pub use table::{flatten_table, Table};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed markup at line {line}, column {column}: {message}")]
    Markup { line: u32, column: u32, message: String },
    #[error("{0}")]
    Table(String),
    #[error("corpus line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One indexable procedure.
///
/// `title` and `headers` hold normalized text (they are index fields only);
/// `body` is the display text and `norm_body` its normalized twin, linked by
/// `offset_map`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureDoc {
    pub doc_id: String,
    pub ata_chapter: String,
    pub applicability: String,
    pub title: String,
    pub headers: String,
    pub body: String,
    pub norm_body: String,
    pub offset_map: OffsetMap,
}

impl ProcedureDoc {
    /// A document whose body is used verbatim (no normalization).
    pub fn plain(doc_id: &str, title: &str, body: &str) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            ata_chapter: String::new(),
            applicability: String::new(),
            title: title.to_string(),
            headers: String::new(),
            body: body.to_string(),
            norm_body: body.to_string(),
            offset_map: OffsetMap::identity(body.chars().count()),
        }
    }

    /// Display-text char range for a `norm_body` char range.
    pub fn display_span(&self, start: usize, end: usize) -> (usize, usize) {
        self.offset_map.map_range(start, end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub line: u32,
    pub column: u32,
    pub doc_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub docs: Vec<ProcedureDoc>,
    pub warnings: Vec<ParseWarning>,
}

/// Parse every `*.xml` file under `dir` (sorted by file name). Ids repeated
/// across files are rejected with a warning like in-file duplicates.
pub fn ingest_dir(dir: &Path, normalizer: &Normalizer) -> Result<(ParseReport, Vec<String>), CorpusError> {
    let io_err = |source| CorpusError::Io { path: dir.display().to_string(), source };
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    files.sort();

    let mut merged = ParseReport::default();
    let mut seen = HashSet::new();
    let mut names = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path)
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        let report = parse_source(&text, normalizer).map_err(|e| match e {
            CorpusError::Markup { line, column, message } => CorpusError::Markup {
                line,
                column,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        merged.warnings.extend(report.warnings);
        for doc in report.docs {
            if seen.insert(doc.doc_id.clone()) {
                merged.docs.push(doc);
            } else {
                merged.warnings.push(ParseWarning {
                    line: 0,
                    column: 0,
                    doc_id: Some(doc.doc_id.clone()),
                    message: format!("duplicate doc_id {} in {} rejected", doc.doc_id, path.display()),
                });
            }
        }
        names.push(path.display().to_string());
    }
    Ok((merged, names))
}

pub fn write_corpus<W: Write>(docs: &[ProcedureDoc], mut out: W) -> std::io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<ProcedureDoc>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Record { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: ProcedureDoc =
            serde_json::from_str(&line).map_err(|e| CorpusError::Record { line: i + 1, message: e.to_string() })?;
        if doc.offset_map.len() != doc.norm_body.chars().count() || !doc.offset_map.is_monotone() {
            return Err(CorpusError::Record { line: i + 1, message: format!("bad offset_map for {}", doc.doc_id) });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: &Path) -> Result<Vec<ProcedureDoc>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    read_corpus(std::io::BufReader::new(file))
}
