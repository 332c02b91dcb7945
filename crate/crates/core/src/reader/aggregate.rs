use super::{DocAnswer, ReaderError, ScoredSpan, SpanPrediction, Tag};
use crate::corpus::ProcedureDoc;
use crate::text::char_slice;

/// Merge per-passage predictions (in passage order) into one answer.
///
/// A passage votes for its best span only if that span beats the passage's
/// no-answer score. No votes at all → NO_ANSWER scored by the largest
/// no-answer score; otherwise the highest-scoring voting span wins, ties
/// going to the earlier passage and then the earlier offset.
pub fn aggregate_answer(preds: &[SpanPrediction], doc: &ProcedureDoc) -> Result<DocAnswer, ReaderError> {
    if preds.is_empty() {
        return Err(ReaderError::Contract(format!("no predictions to aggregate for {}", doc.doc_id)));
    }
    if let Some(p) = preds.iter().find(|p| p.doc_id != doc.doc_id) {
        return Err(ReaderError::Contract(format!(
            "prediction {} belongs to {}, not {}",
            p.passage_id, p.doc_id, doc.doc_id
        )));
    }

    let mut winner: Option<&ScoredSpan> = None;
    for pred in preds {
        let Some(best) = passage_best(pred) else { continue };
        if best.score <= pred.no_answer_score {
            continue;
        }
        // strict comparison keeps the earlier passage on ties
        if winner.is_none_or(|w| best.score > w.score) {
            winner = Some(best);
        }
    }

    let best_span_score = preds.iter().flat_map(|p| p.spans.iter().map(|s| s.score)).fold(0.0, f64::max);
    let (tag, tag_score) = aggregate_tag(preds)?;
    Ok(match winner {
        Some(span) => DocAnswer {
            doc_id: doc.doc_id.clone(),
            answer_text: Some(char_slice(&doc.norm_body, span.start, span.end).to_string()),
            char_span: Some((span.start, span.end)),
            qa_score: span.score,
            best_span_score,
            tag,
            tag_score,
        },
        None => DocAnswer {
            doc_id: doc.doc_id.clone(),
            answer_text: None,
            char_span: None,
            qa_score: preds.iter().map(|p| p.no_answer_score).fold(f64::NEG_INFINITY, f64::max),
            best_span_score,
            tag,
            tag_score,
        },
    })
}

/// Highest-scoring span of one passage; equal scores go to the earlier offset.
fn passage_best(pred: &SpanPrediction) -> Option<&ScoredSpan> {
    pred.spans.iter().reduce(|best, s| {
        if s.score > best.score || (s.score == best.score && s.start < best.start) {
            s
        } else {
            best
        }
    })
}

/// Tag of the passage whose classification score is highest; ties go to the
/// earlier passage.
pub fn aggregate_tag(preds: &[SpanPrediction]) -> Result<(Tag, f64), ReaderError> {
    let first = preds.first().ok_or_else(|| ReaderError::Contract("no predictions to aggregate".into()))?;
    let best = preds[1..].iter().fold(first, |best, p| if p.tag_score > best.tag_score { p } else { best });
    Ok((best.tag, best.tag_score))
}
