//! Intent recognition, dialog policy and session state.
//!
//! A question runs the pipeline and cites the top-ranked answer; each
//! negative feedback moves to the answer from the next-ranked document until
//! the list runs out.

mod lexicon;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pipeline::{Pipeline, RankedAnswer};
use crate::reader::content_terms;

pub use lexicon::{normalize_utterance, Lexicon, LexiconError, Pattern, PatternEntry, REQUIRED_TEMPLATES};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum IntentName {
    Question,
    PositiveFeedback,
    NegativeFeedback,
    Greeting,
    Goodbye,
    Thanking,
    Chitchat(String),
    OutOfScope,
}

impl fmt::Display for IntentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntentName::Question => f.write_str("question"),
            IntentName::PositiveFeedback => f.write_str("positive_feedback"),
            IntentName::NegativeFeedback => f.write_str("negative_feedback"),
            IntentName::Greeting => f.write_str("greeting"),
            IntentName::Goodbye => f.write_str("goodbye"),
            IntentName::Thanking => f.write_str("thanking"),
            IntentName::Chitchat(sub) => write!(f, "chitchat.{sub}"),
            IntentName::OutOfScope => f.write_str("out_of_scope"),
        }
    }
}

impl FromStr for IntentName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "question" => IntentName::Question,
            "positive_feedback" => IntentName::PositiveFeedback,
            "negative_feedback" => IntentName::NegativeFeedback,
            "greeting" => IntentName::Greeting,
            "goodbye" => IntentName::Goodbye,
            "thanking" => IntentName::Thanking,
            "out_of_scope" => IntentName::OutOfScope,
            other => match other.strip_prefix("chitchat.") {
                Some(sub) if !sub.is_empty() => IntentName::Chitchat(sub.to_string()),
                _ => return Err(format!("unknown intent {other:?}")),
            },
        })
    }
}

impl From<IntentName> for String {
    fn from(n: IntentName) -> Self {
        n.to_string()
    }
}

impl TryFrom<String> for IntentName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub name: IntentName,
    pub confidence: f64,
}

const WH_WORDS: [&str; 10] = ["what", "when", "where", "which", "who", "whom", "whose", "why", "how", "how's"];

/// First matching lexicon pattern wins (exact phrase 1.0, regex 0.9). With
/// no match, interrogatives are questions (0.8), then anything with at
/// least three content terms (0.6); the rest is out of scope.
pub fn classify_intent(utterance: &str, lexicon: &Lexicon) -> Intent {
    let norm = normalize_utterance(utterance);
    for entry in lexicon.entries() {
        let confidence = match &entry.pattern {
            Pattern::Phrase(p) if *p == norm => 1.0,
            Pattern::Regex(re) if re.is_match(&norm) => 0.9,
            _ => continue,
        };
        return Intent { name: entry.intent.clone(), confidence };
    }
    let first = norm.split(' ').next().unwrap_or("");
    if WH_WORDS.contains(&first) || utterance.trim_end().ends_with('?') {
        return Intent { name: IntentName::Question, confidence: 0.8 };
    }
    if content_terms(utterance).len() >= 3 {
        Intent { name: IntentName::Question, confidence: 0.6 }
    } else {
        Intent { name: IntentName::OutOfScope, confidence: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "template", rename_all = "snake_case")]
pub enum Action {
    AnswerQuestion,
    NextRankedAnswer,
    Utter(String),
    ApologizeNoMore,
}

/// One reply. `answer` is the cited candidate, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub text: String,
    pub answer: Option<RankedAnswer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub utterance: String,
    pub intent: Intent,
    pub action: Action,
    pub reply: Reply,
}

/// Where answers come from.
pub trait AnswerSource {
    fn answer(&self, question: &str) -> Result<Vec<RankedAnswer>, String>;

    fn title(&self, _doc_id: &str) -> Option<String> {
        None
    }
}

impl AnswerSource for Pipeline {
    fn answer(&self, question: &str) -> Result<Vec<RankedAnswer>, String> {
        Pipeline::answer(self, question).map_err(|e| e.to_string())
    }

    fn title(&self, doc_id: &str) -> Option<String> {
        self.index().doc(doc_id).map(|d| d.title.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogSession {
    pub session_id: String,
    pub history: Vec<Turn>,
    pub current_question: Option<String>,
    pub current_results: Vec<RankedAnswer>,
    pub cursor: usize,
}

pub fn next_action(session: &DialogSession, intent: &Intent) -> Action {
    match &intent.name {
        IntentName::Question => Action::AnswerQuestion,
        IntentName::NegativeFeedback if session.cursor + 1 < session.current_results.len() => Action::NextRankedAnswer,
        IntentName::NegativeFeedback => Action::ApologizeNoMore,
        IntentName::OutOfScope => Action::Utter("clarify".into()),
        other => Action::Utter(other.to_string()),
    }
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

impl DialogSession {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self { session_id: session_id.into(), ..Default::default() }
    }

    /// The candidate currently proposed to the user.
    pub fn current(&self) -> Option<&RankedAnswer> {
        self.current_results.get(self.cursor)
    }

    fn template<'a>(lexicon: &'a Lexicon, id: &str) -> &'a str {
        lexicon.template(id).unwrap_or("")
    }

    fn cite(&self, lexicon: &Lexicon, source: &dyn AnswerSource) -> Reply {
        let cand = self.current().expect("cite needs a current result").clone();
        let title = source.title(&cand.result.doc_id).unwrap_or_default();
        let rank = cand.result.rank.to_string();
        let question = self.current_question.clone().unwrap_or_default();
        let answer = cand.answer.answer_text.clone().unwrap_or_default();
        let id = if cand.answer.is_no_answer() { "no_answer" } else { "answer" };
        let text = render(
            Self::template(lexicon, id),
            &[
                ("answer", &answer),
                ("doc_id", &cand.result.doc_id),
                ("title", &title),
                ("rank", &rank),
                ("question", &question),
            ],
        );
        Reply { text, answer: Some(cand) }
    }

    /// Carry out `action` for `utterance`. Session state changes only on
    /// success; a pipeline failure leaves it as it was.
    pub fn execute(&mut self, utterance: &str, action: &Action, lexicon: &Lexicon, source: &dyn AnswerSource) -> Reply {
        let utter = |id: &str, q: &str| Reply {
            text: render(Self::template(lexicon, id), &[("question", q)]),
            answer: None,
        };
        match action {
            Action::AnswerQuestion => match source.answer(utterance) {
                Ok(results) => {
                    self.current_question = Some(utterance.to_string());
                    self.current_results = results;
                    self.cursor = 0;
                    if self.current_results.is_empty() {
                        utter("no_match", utterance)
                    } else {
                        self.cite(lexicon, source)
                    }
                }
                Err(e) => {
                    tracing::warn!(session = %self.session_id, error = %e, "pipeline failed");
                    utter("error", utterance)
                }
            },
            Action::NextRankedAnswer => {
                self.cursor += 1;
                self.cite(lexicon, source)
            }
            Action::ApologizeNoMore => utter("no_more", self.current_question.as_deref().unwrap_or("")),
            Action::Utter(id) => utter(id, ""),
        }
    }

    /// Classify, decide, execute and record one turn.
    pub fn handle(&mut self, utterance: &str, lexicon: &Lexicon, source: &dyn AnswerSource) -> &Turn {
        let intent = classify_intent(utterance, lexicon);
        let action = next_action(self, &intent);
        let reply = self.execute(utterance, &action, lexicon, source);
        self.history.push(Turn { utterance: utterance.to_string(), intent, action, reply });
        self.history.last().expect("just pushed")
    }

    /// Rebuild a session by replaying utterances from scratch.
    pub fn replay<'a>(
        session_id: &str,
        utterances: impl IntoIterator<Item = &'a str>,
        lexicon: &Lexicon,
        source: &dyn AnswerSource,
    ) -> Self {
        let mut s = Self::new(session_id);
        for u in utterances {
            s.handle(u, lexicon, source);
        }
        s
    }
}
