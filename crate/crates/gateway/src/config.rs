//! Pipeline configuration file (TOML).
//!
//! ```toml
//! index = "fixture.idx"            # required
//! reader = "lexical"               # or "remote:http://host:port/read"
//! reranker = "zscore_add"          # retriever_only | qa_only | multiply | zscore_add | gbrt:<model path>
//! k = 10
//! max_seq_len = 512                # 384 or 512
//! stride = 128
//! in_flight = 8
//! timeout_ms = 10000               # remote reader timeout
//! port = 8080                      # MANUALQA_PORT overrides
//! lexicon = "lexicon.txt"          # optional, built-in lexicon otherwise
//! session_snapshot = "sessions.json"  # optional
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use manualqa_core::dialog::Lexicon;
use manualqa_core::index::InvertedIndex;
use manualqa_core::pipeline::{Pipeline, PipelineSettings};
use manualqa_core::reader::{LexicalReader, ReaderBackend, ReaderConfig, RemoteReader};
use manualqa_core::rerank::{Combiner, GbrtModel};
use serde::Deserialize;

pub const PORT_ENV: &str = "MANUALQA_PORT";

#[derive(Debug, Clone, PartialEq)]
pub enum ReaderSpec {
    Lexical,
    Remote(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RerankerSpec {
    Named(String),
    Gbrt(PathBuf),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    index: PathBuf,
    #[serde(default = "default_reader")]
    reader: String,
    #[serde(default = "default_reranker")]
    reranker: String,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_max_seq_len")]
    max_seq_len: usize,
    #[serde(default = "default_stride")]
    stride: usize,
    #[serde(default = "default_in_flight")]
    in_flight: usize,
    #[serde(default = "default_timeout_ms")]
    timeout_ms: u64,
    #[serde(default = "default_port")]
    port: u16,
    lexicon: Option<PathBuf>,
    session_snapshot: Option<PathBuf>,
}

fn default_reader() -> String {
    "lexical".into()
}
fn default_reranker() -> String {
    "zscore_add".into()
}
fn default_k() -> usize {
    10
}
fn default_max_seq_len() -> usize {
    512
}
fn default_stride() -> usize {
    128
}
fn default_in_flight() -> usize {
    8
}
fn default_timeout_ms() -> u64 {
    10_000
}
fn default_port() -> u16 {
    8080
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub index: PathBuf,
    pub reader: ReaderSpec,
    pub reranker: RerankerSpec,
    pub settings: PipelineSettings,
    pub timeout: Duration,
    pub port: u16,
    pub lexicon: Option<PathBuf>,
    pub session_snapshot: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text, base).with_context(|| format!("config {}", path.display()))?;
        if let Ok(port) = std::env::var(PORT_ENV) {
            cfg.port = port.parse().with_context(|| format!("{PORT_ENV}={port:?} is not a port"))?;
        }
        Ok(cfg)
    }

    /// Parse and validate; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };

        let reader = match raw.reader.split_once(':') {
            None if raw.reader == "lexical" => ReaderSpec::Lexical,
            Some(("remote", url)) if !url.is_empty() => ReaderSpec::Remote(url.to_string()),
            _ => bail!("reader must be \"lexical\" or \"remote:<url>\", got {:?}", raw.reader),
        };
        let reranker = match raw.reranker.split_once(':') {
            Some(("gbrt", model)) if !model.is_empty() => RerankerSpec::Gbrt(resolve(model.into())),
            None => {
                Combiner::from_name(&raw.reranker)?;
                RerankerSpec::Named(raw.reranker)
            }
            _ => bail!("reranker {:?} not understood", raw.reranker),
        };
        if raw.k == 0 {
            bail!("k must be at least 1");
        }
        if raw.max_seq_len != 384 && raw.max_seq_len != 512 {
            bail!("max_seq_len must be 384 or 512, got {}", raw.max_seq_len);
        }
        if raw.stride == 0 || raw.stride >= raw.max_seq_len {
            bail!("stride must be in [1, max_seq_len)");
        }
        if raw.in_flight == 0 {
            bail!("in_flight must be at least 1");
        }
        Ok(Self {
            index: resolve(raw.index),
            reader,
            reranker,
            settings: PipelineSettings {
                k: raw.k,
                max_seq_len: raw.max_seq_len,
                stride: raw.stride,
                in_flight: raw.in_flight,
            },
            timeout: Duration::from_millis(raw.timeout_ms),
            port: raw.port,
            lexicon: raw.lexicon.map(resolve),
            session_snapshot: raw.session_snapshot.map(resolve),
        })
    }

    pub fn reader_backend(&self) -> Arc<dyn ReaderBackend> {
        match &self.reader {
            ReaderSpec::Lexical => Arc::new(LexicalReader::default()),
            ReaderSpec::Remote(url) => Arc::new(RemoteReader::new(url, self.timeout, ReaderConfig::default())),
        }
    }

    pub fn combiner(&self) -> Result<Combiner> {
        Ok(match &self.reranker {
            RerankerSpec::Named(name) => Combiner::from_name(name)?,
            RerankerSpec::Gbrt(path) => Combiner::Gbrt(Arc::new(GbrtModel::load(path)?)),
        })
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon {
            Some(path) => Ok(Lexicon::load(path)?),
            None => Ok(Lexicon::builtin()),
        }
    }

    /// Load the index and assemble the pipeline over it.
    pub fn pipeline(&self) -> Result<Pipeline> {
        let index = InvertedIndex::load(&self.index).with_context(|| format!("loading index {}", self.index.display()))?;
        self.pipeline_over(Arc::new(index))
    }

    pub fn pipeline_over(&self, index: Arc<InvertedIndex>) -> Result<Pipeline> {
        Ok(Pipeline::new(index, self.reader_backend(), self.combiner()?, self.settings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_resolution() {
        let cfg = Config::parse("index = \"idx.json\"\nreranker = \"gbrt:m.json\"\n", Path::new("/etc/qa")).unwrap();
        assert_eq!(cfg.index, Path::new("/etc/qa/idx.json"));
        assert_eq!(cfg.reranker, RerankerSpec::Gbrt("/etc/qa/m.json".into()));
        assert_eq!(cfg.reader, ReaderSpec::Lexical);
        assert_eq!(cfg.settings, PipelineSettings::default());
    }

    #[test]
    fn rejects_invalid() {
        let base = Path::new(".");
        for bad in [
            "index = \"x\"\nk = 0",
            "index = \"x\"\nmax_seq_len = 256",
            "index = \"x\"\nreranker = \"lambdamart\"",
            "index = \"x\"\nreader = \"bert\"",
            "index = \"x\"\ncolour = \"red\"",
            "reader = \"lexical\"",
        ] {
            assert!(Config::parse(bad, base).is_err(), "{bad}");
        }
        let remote = Config::parse("index = \"x\"\nreader = \"remote:http://h:1/read\"", base).unwrap();
        assert_eq!(remote.reader, ReaderSpec::Remote("http://h:1/read".into()));
    }
}
