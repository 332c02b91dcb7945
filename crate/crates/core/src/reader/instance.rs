//! `(c, s, e, t)` training instances for an external multi-task trainer.
//!
//! Token ids come from this crate's own hashed vocabulary: `[PAD]=0`,
//! `[CLS]=1`, `[SEP]=2`, `[UNK]=3`, and every other (cased) token maps to
//! `4 + fnv1a64(token) mod (VOCAB_SIZE - 4)`. There is no parity with any
//! published wordpiece vocabulary.

use serde::{Deserialize, Serialize};

use super::window::{window_passages, SPECIAL_TOKENS};
use super::{Passage, ReaderError, Tag};
use crate::corpus::ProcedureDoc;
use crate::text::{char_len, char_slice, tokenize, tokenize_chars, Token};

pub const PAD_ID: u32 = 0;
pub const CLS_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
pub const VOCAB_SIZE: u32 = 30522;
const FIRST_WORD_ID: u32 = 4;

pub fn token_id(token: &str) -> u32 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in token.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    FIRST_WORD_ID + (h % (VOCAB_SIZE - FIRST_WORD_ID) as u64) as u32
}

/// `c` is `[CLS] question [SEP] passage [SEP]` padded to `max_seq_len`;
/// `s`/`e` are inclusive positions in `c`, both 0 for NO_SPAN.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub c: Vec<u32>,
    pub s: usize,
    pub e: usize,
    pub t: Tag,
}

fn passage_tokens(passage: &Passage) -> Vec<Token> {
    tokenize_chars(&passage.text.chars().collect::<Vec<_>>(), passage.char_start)
}

/// Encode one question/passage pair. A gold answer that is not entirely
/// inside the passage yields a NO_SPAN instance.
pub fn encode_training_instance(
    question: &str,
    passage: &Passage,
    gold: Option<(&str, usize)>,
    max_seq_len: usize,
) -> Result<TrainingInstance, ReaderError> {
    let q = tokenize(question);
    let p = passage_tokens(passage);
    if q.len() + p.len() + SPECIAL_TOKENS > max_seq_len {
        return Err(ReaderError::Contract(format!(
            "passage {} ({} tokens) does not fit beside a {}-token question in {max_seq_len}",
            passage.passage_id,
            p.len(),
            q.len()
        )));
    }

    let mut c = Vec::with_capacity(max_seq_len);
    c.push(CLS_ID);
    c.extend(q.iter().map(|t| token_id(&t.text)));
    c.push(SEP_ID);
    let offset = c.len();
    c.extend(p.iter().map(|t| token_id(&t.text)));
    c.push(SEP_ID);
    c.resize(max_seq_len, PAD_ID);

    let span = gold.and_then(|(text, start)| {
        let end = start + char_len(text);
        if text.is_empty() || start < passage.char_start || end > passage.char_end {
            return None;
        }
        let s = p.iter().position(|t| t.end > start)?;
        let e = p.iter().rposition(|t| t.start < end)?;
        (s <= e).then_some((offset + s, offset + e))
    });
    Ok(match span {
        Some((s, e)) => TrainingInstance { c, s, e, t: Tag::Span },
        None => TrainingInstance { c, s: 0, e: 0, t: Tag::NoSpan },
    })
}

/// Recover the answer text of a SPAN instance from its passage.
pub fn decode_span(instance: &TrainingInstance, question: &str, passage: &Passage) -> Option<String> {
    if instance.t != Tag::Span {
        return None;
    }
    let offset = tokenize(question).len() + 2;
    let p = passage_tokens(passage);
    let first = p.get(instance.s.checked_sub(offset)?)?;
    let last = p.get(instance.e.checked_sub(offset)?)?;
    Some(
        char_slice(&passage.text, first.start - passage.char_start, last.end - passage.char_start).to_string(),
    )
}

/// Window a document for a question and encode every window against the
/// gold answer (or none, for unanswerable questions).
pub fn instances_for_example(
    question: &str,
    doc: &ProcedureDoc,
    gold: Option<(&str, usize)>,
    max_seq_len: usize,
    stride: usize,
) -> Result<Vec<(Passage, TrainingInstance)>, ReaderError> {
    let q_len = tokenize(question).len();
    window_passages(doc, q_len, max_seq_len, stride)?
        .into_iter()
        .map(|p| encode_training_instance(question, &p, gold, max_seq_len).map(|inst| (p, inst)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: &str = "what is the max crosswind?";

    fn passage(body: &str) -> (ProcedureDoc, Passage) {
        let doc = ProcedureDoc::plain("D", "", body);
        let p = window_passages(&doc, tokenize(Q).len(), 64, 8).unwrap().remove(0);
        (doc, p)
    }

    #[test]
    fn span_points_at_answer_tokens() {
        let body = "crosswind max is 38 kt";
        let (_, p) = passage(body);
        let inst = encode_training_instance(Q, &p, Some(("38 kt", 17)), 64).unwrap();
        assert_eq!(inst.t, Tag::Span);
        assert_eq!(inst.c.len(), 64);
        // [CLS] + 6 question tokens + [SEP] = 8 → "38" is passage token 3
        assert_eq!((inst.s, inst.e), (8 + 3, 8 + 4));
        assert_eq!(inst.c[inst.s], token_id("38"));
        assert_eq!(inst.c[inst.e], token_id("kt"));
        assert_eq!(decode_span(&inst, Q, &p).as_deref(), Some("38 kt"));
    }

    #[test]
    fn layout_has_specials_and_padding() {
        let (_, p) = passage("a b");
        let inst = encode_training_instance(Q, &p, None, 64).unwrap();
        assert_eq!(inst.c[0], CLS_ID);
        assert_eq!(inst.c[7], SEP_ID);
        assert_eq!(inst.c[10], SEP_ID);
        assert!(inst.c[11..].iter().all(|&x| x == PAD_ID));
        assert_eq!((inst.s, inst.e, inst.t), (0, 0, Tag::NoSpan));
    }

    #[test]
    fn answer_in_other_window_is_no_span() {
        let body = (0..60).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ") + " answer here";
        let doc = ProcedureDoc::plain("D", "", &body);
        let start = body.find("answer").unwrap();
        let all = instances_for_example(Q, &doc, Some(("answer here", start)), 32, 4).unwrap();
        assert!(all.len() > 2);
        let spans: Vec<_> = all.iter().filter(|(_, i)| i.t == Tag::Span).collect();
        assert!(!spans.is_empty());
        for (p, inst) in &all {
            if inst.t == Tag::NoSpan {
                assert_eq!((inst.s, inst.e), (0, 0));
                assert!(p.char_end < start + 11 || p.char_start > start);
            } else {
                assert_eq!(decode_span(inst, Q, p).as_deref(), Some("answer here"));
            }
        }
    }

    #[test]
    fn token_ids_stay_in_vocab() {
        for t in ["a", "crosswind", "38", "°", "ÉCAM"] {
            let id = token_id(t);
            assert!((FIRST_WORD_ID..VOCAB_SIZE).contains(&id));
        }
        assert_ne!(token_id("Max"), token_id("max"));
    }
}
