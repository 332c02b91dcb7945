use super::{Passage, ReaderError};
use crate::corpus::ProcedureDoc;
use crate::text::{char_slice, tokenize};

/// `[CLS] question [SEP] passage [SEP]`
pub const SPECIAL_TOKENS: usize = 3;

/// Cut a document into overlapping token windows that fit next to the
/// question in a `max_seq_len` input. Consecutive windows share exactly
/// `stride` tokens; the last window ends at the last token.
pub fn window_passages(
    doc: &ProcedureDoc,
    question_tokens: usize,
    max_seq_len: usize,
    stride: usize,
) -> Result<Vec<Passage>, ReaderError> {
    let budget = max_seq_len.saturating_sub(question_tokens + SPECIAL_TOKENS);
    if budget <= stride {
        return Err(ReaderError::QuestionTooLong { budget, stride });
    }
    let tokens = tokenize(&doc.norm_body);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }

    let advance = budget - stride;
    let mut passages = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + budget).min(tokens.len());
        let char_start = tokens[start].start;
        let char_end = tokens[end - 1].end;
        let ordinal = passages.len();
        passages.push(Passage {
            passage_id: format!("{}#{}", doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            ordinal,
            token_start: start,
            token_end: end,
            char_start,
            char_end,
            token_count: end - start,
            text: char_slice(&doc.norm_body, char_start, char_end).to_string(),
        });
        if end == tokens.len() {
            break;
        }
        start += advance;
    }
    Ok(passages)
}
