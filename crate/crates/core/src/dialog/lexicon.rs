//! Intent lexicon and reply templates.
//!
//! The file is a sequence of blocks:
//!
//! ```text
//! # comment
//! [intent greeting]
//! phrase: hello
//! regex: ^good (morning|afternoon|evening)\b
//! reply: Hello! Ask me anything about the manual.
//!
//! [chitchat weather]
//! phrase: how is the weather
//! reply: I only know what is in the manual, not the forecast.
//!
//! [template no_more]
//! reply: Sorry, I have no other answer to propose.
//! ```
//!
//! `phrase:` lines match the whole normalized utterance; `regex:` lines are
//! searched in it. The first `reply:` of a block is its template; template
//! ids are the intent name (`chitchat.<name>` for chitchat blocks) or the
//! `[template ...]` name. Templates may use `{answer}`, `{doc_id}`,
//! `{title}`, `{rank}` and `{question}`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regex::Regex;
use thiserror::Error;

use super::IntentName;

const BUILTIN: &str = include_str!("../../data/lexicon.txt");

/// Templates the dialog policy refers to directly.
pub const REQUIRED_TEMPLATES: [&str; 10] = [
    "greeting",
    "goodbye",
    "thanking",
    "positive_feedback",
    "clarify",
    "answer",
    "no_answer",
    "no_match",
    "no_more",
    "error",
];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: bad regex: {source}")]
    Regex { line: usize, source: regex::Error },
    #[error("line {line}: phrase {phrase:?} already belongs to {owner}")]
    Duplicate { line: usize, phrase: String, owner: String },
    #[error("missing template {0:?}")]
    MissingTemplate(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub enum Pattern {
    Phrase(String),
    Regex(Regex),
}

#[derive(Debug, Clone)]
pub struct PatternEntry {
    pub intent: IntentName,
    pub pattern: Pattern,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    /// In match order: chitchat, feedback, social, question.
    entries: Vec<PatternEntry>,
    templates: BTreeMap<String, String>,
}

/// Lowercase, fold curly apostrophes, drop punctuation other than
/// apostrophes, collapse whitespace.
pub fn normalize_utterance(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' => '\'',
            c if c.is_alphanumeric() || c == '\'' => c,
            _ => ' ',
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn priority(intent: &IntentName) -> u8 {
    match intent {
        IntentName::Chitchat(_) => 0,
        IntentName::PositiveFeedback | IntentName::NegativeFeedback => 1,
        IntentName::Greeting | IntentName::Goodbye | IntentName::Thanking | IntentName::OutOfScope => 2,
        IntentName::Question => 3,
    }
}

enum Block {
    Intent(IntentName),
    Template(String),
}

impl Lexicon {
    /// The lexicon shipped with the library.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries: Vec<PatternEntry> = Vec::new();
        let mut templates = BTreeMap::new();
        let mut phrases: HashMap<String, String> = HashMap::new();
        let mut block: Option<(Block, String)> = None;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| LexiconError::Syntax { line: line_no, message };
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let (kind, name) = header.split_once(' ').ok_or_else(|| syntax(format!("bad block header [{header}]")))?;
                let name = name.trim();
                let b = match kind {
                    "intent" => Block::Intent(
                        name.parse::<IntentName>()
                            .ok()
                            .filter(|n| !matches!(n, IntentName::Chitchat(_)))
                            .ok_or_else(|| syntax(format!("unknown intent {name:?}")))?,
                    ),
                    "chitchat" if !name.is_empty() && !name.contains(char::is_whitespace) => {
                        Block::Intent(IntentName::Chitchat(name.to_string()))
                    }
                    "template" if !name.is_empty() => Block::Template(name.to_string()),
                    _ => return Err(syntax(format!("bad block header [{header}]"))),
                };
                let id = match &b {
                    Block::Intent(n) => n.to_string(),
                    Block::Template(t) => t.clone(),
                };
                if templates.contains_key(&id) || entries.iter().any(|e| e.intent.to_string() == id) {
                    return Err(syntax(format!("block {id:?} defined twice")));
                }
                block = Some((b, id));
                continue;
            }

            let (key, value) = line.split_once(':').ok_or_else(|| syntax(format!("expected key: value, got {line:?}")))?;
            let value = value.trim();
            let Some((b, id)) = &block else {
                return Err(syntax("entry outside a block".into()));
            };
            match (key.trim(), b) {
                ("reply", _) => {
                    templates.entry(id.clone()).or_insert_with(|| value.to_string());
                }
                ("phrase", Block::Intent(intent)) => {
                    let phrase = normalize_utterance(value);
                    if phrase.is_empty() {
                        return Err(syntax("empty phrase".into()));
                    }
                    if let Some(owner) = phrases.insert(phrase.clone(), id.clone()) {
                        return Err(LexiconError::Duplicate { line: line_no, phrase, owner });
                    }
                    entries.push(PatternEntry { intent: intent.clone(), pattern: Pattern::Phrase(phrase) });
                }
                ("regex", Block::Intent(intent)) => {
                    let re = Regex::new(value).map_err(|source| LexiconError::Regex { line: line_no, source })?;
                    entries.push(PatternEntry { intent: intent.clone(), pattern: Pattern::Regex(re) });
                }
                (k, _) => return Err(syntax(format!("unexpected key {k:?} here"))),
            }
        }

        entries.sort_by_key(|e| priority(&e.intent));
        let lexicon = Self { entries, templates };
        for t in REQUIRED_TEMPLATES {
            if !lexicon.templates.contains_key(t) {
                return Err(LexiconError::MissingTemplate(t.to_string()));
            }
        }
        for name in lexicon.chitchat_intents() {
            let id = format!("chitchat.{name}");
            if !lexicon.templates.contains_key(&id) {
                return Err(LexiconError::MissingTemplate(id));
            }
        }
        Ok(lexicon)
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }

    pub fn template(&self, id: &str) -> Option<&str> {
        self.templates.get(id).map(String::as_str)
    }

    /// Distinct chitchat sub-intent names, sorted.
    pub fn chitchat_intents(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .entries
            .iter()
            .filter_map(|e| match &e.intent {
                IntentName::Chitchat(n) => Some(n.as_str()),
                _ => None,
            })
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }

    /// Every literal phrase with its intent.
    pub fn phrases(&self) -> impl Iterator<Item = (&IntentName, &str)> {
        self.entries.iter().filter_map(|e| match &e.pattern {
            Pattern::Phrase(p) => Some((&e.intent, p.as_str())),
            Pattern::Regex(_) => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[intent greeting]
phrase: Hello!
reply: hi
[intent goodbye]
reply: bye
[intent thanking]
reply: welcome
[intent positive_feedback]
phrase: great
reply: good
[template clarify]
reply: ?
[template answer]
reply: {answer}
[template no_answer]
reply: -
[template no_match]
reply: -
[template no_more]
reply: -
[template error]
reply: -
[chitchat age]
phrase: how old are you
reply: ageless
";

    #[test]
    fn parses_blocks() {
        let lex = Lexicon::parse(MINIMAL).unwrap();
        assert_eq!(lex.template("greeting"), Some("hi"));
        assert_eq!(lex.chitchat_intents(), ["age"]);
        assert!(matches!(lex.entries()[0].intent, IntentName::Chitchat(_)));
        assert!(lex.phrases().any(|(_, p)| p == "hello"));
    }

    #[test]
    fn rejects_bad_input() {
        let dup = format!("{MINIMAL}[intent negative_feedback]\nphrase: great\n");
        assert!(matches!(Lexicon::parse(&dup), Err(LexiconError::Duplicate { .. })));
        let no_reply = format!("{MINIMAL}[chitchat joke]\nphrase: tell me a joke\n");
        assert!(matches!(Lexicon::parse(&no_reply), Err(LexiconError::MissingTemplate(t)) if t == "chitchat.joke"));
        assert!(matches!(Lexicon::parse("[intent dance]\n"), Err(LexiconError::Syntax { line: 1, .. })));
        assert!(matches!(Lexicon::parse("phrase: x\n"), Err(LexiconError::Syntax { .. })));
        let bad_re = format!("{MINIMAL}[intent negative_feedback]\nregex: (\n");
        assert!(matches!(Lexicon::parse(&bad_re), Err(LexiconError::Regex { .. })));
        assert!(matches!(Lexicon::parse("[intent greeting]\nreply: x\n"), Err(LexiconError::MissingTemplate(_))));
    }

    #[test]
    fn utterance_normalization() {
        assert_eq!(normalize_utterance("No, that\u{2019}s NOT it!"), "no that's not it");
        assert_eq!(normalize_utterance("  "), "");
    }

    #[test]
    fn builtin_loads() {
        let lex = Lexicon::builtin();
        assert!(lex.chitchat_intents().len() >= 50);
    }
}
