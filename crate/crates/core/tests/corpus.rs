use std::path::PathBuf;

use manualqa_core::corpus::{
    ingest_dir, normalize_text, parse_source, read_corpus, write_corpus, AbbrevTable, Normalizer, UnitRule,
};
use manualqa_core::metrics::load_qa_jsonl;
use manualqa_core::text::{char_slice, tokenize};
use proptest::prelude::*;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn fixture_normalizer() -> Normalizer {
    Normalizer {
        abbrevs: AbbrevTable::from_tsv(&std::fs::read_to_string(data("abbrev.tsv")).unwrap()).unwrap(),
        unit_rules: UnitRule::from_tsv(&std::fs::read_to_string(data("units.tsv")).unwrap()).unwrap(),
    }
}

#[test]
fn malformed_unit_is_reported_not_fatal() {
    let src = std::fs::read_to_string(data("malformed.xml")).unwrap();
    let report = parse_source(&src, &Normalizer::default()).unwrap();
    let ids: Vec<_> = report.docs.iter().map(|d| d.doc_id.as_str()).collect();
    assert_eq!(ids, ["M1", "M2", "M4", "M5"]);
    assert_eq!(report.warnings.len(), 1);
    assert_eq!(report.warnings[0].line, 5);
}

#[test]
fn broken_markup_fails_with_position() {
    let err = parse_source("<manual>\n<procedure id=\"x\">\n</manual>", &Normalizer::default()).unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
}

#[test]
fn fixture_corpus_shape() {
    let (report, files) = ingest_dir(&data("corpus"), &fixture_normalizer()).unwrap();
    assert!(report.warnings.is_empty());
    assert!(files.len() > 10);
    let words: Vec<usize> = report.docs.iter().map(|d| d.body.split_whitespace().count()).collect();
    let mean = words.iter().sum::<usize>() as f64 / words.len() as f64;
    assert!((150.0..=260.0).contains(&mean), "mean {mean}");
    assert!(*words.iter().max().unwrap() > 2900);
}

#[test]
fn sanity_answers_sit_in_normalized_bodies() {
    let (report, _) = ingest_dir(&data("corpus"), &fixture_normalizer()).unwrap();
    let examples = load_qa_jsonl(&data("sanity_questions.jsonl")).unwrap();
    assert_eq!(examples.len(), 20);
    for ex in &examples {
        let doc = report.docs.iter().find(|d| d.doc_id == ex.gold_doc_id).unwrap();
        assert_eq!(ex.misplaced_answer(doc), None, "{}", ex.question);
        let a = &ex.answers[0];
        let (s, e) = doc.display_span(a.char_start, a.char_start + a.text.chars().count());
        assert!(s < e && e <= doc.body.chars().count());
    }
}

#[test]
fn ingest_is_deterministic_and_round_trips() {
    let norm = fixture_normalizer();
    let (a, _) = ingest_dir(&data("corpus"), &norm).unwrap();
    let (b, _) = ingest_dir(&data("corpus"), &norm).unwrap();
    assert_eq!(a.docs, b.docs);
    let mut buf = Vec::new();
    write_corpus(&a.docs, &mut buf).unwrap();
    assert_eq!(read_corpus(buf.as_slice()).unwrap(), a.docs);
}

fn tables() -> (AbbrevTable, Vec<UnitRule>) {
    let mut t = AbbrevTable::new();
    t.insert("ENG", "engine").unwrap();
    t.insert("L/G", "landing gear").unwrap();
    t.insert("XWIND", "crosswind").unwrap();
    t.insert("MAX", "maximum").unwrap();
    let rules = vec![UnitRule::new(r"(\d)\s*(KT|kt)\b", "${1} kt").unwrap(), UnitRule::new(r"(\d)\s*FT\b", "${1} ft").unwrap()];
    (t, rules)
}

fn raw_text() -> impl Strategy<Value = String> {
    let word = prop_oneof![
        Just("ENG".to_string()),
        Just("L/G".to_string()),
        Just("XWIND".to_string()),
        Just("MAX".to_string()),
        Just("38KT".to_string()),
        Just("2500 FT".to_string()),
        Just("ENGINE".to_string()),
        "[a-z]{1,6}",
        "[0-9]{1,4}",
        Just(",".to_string()),
        Just(".".to_string()),
    ];
    prop::collection::vec(word, 0..20).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn normalization_is_idempotent(raw in raw_text()) {
        let (t, rules) = tables();
        let (once, _) = normalize_text(&raw, &t, &rules);
        let (twice, _) = normalize_text(&once, &t, &rules);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn offset_round_trip(raw in raw_text(), a in 0usize..200, b in 0usize..200) {
        let (t, rules) = tables();
        let (norm, map) = normalize_text(&raw, &t, &rules);
        prop_assert!(map.is_monotone());
        let toks = tokenize(&norm);
        prop_assume!(!toks.is_empty());
        let (i, j) = (a % toks.len(), b % toks.len());
        let (i, j) = (i.min(j), i.max(j));
        let (ns, ne) = (toks[i].start, toks[j].end);
        let (rs, re) = map.map_range(ns, ne);
        let (renorm, _) = normalize_text(char_slice(&raw, rs, re), &t, &rules);
        let want: Vec<String> = tokenize(char_slice(&norm, ns, ne)).into_iter().map(|t| t.text).collect();
        let got: Vec<String> = tokenize(&renorm).into_iter().map(|t| t.text).collect();
        prop_assert!(got.windows(want.len()).any(|w| w == want.as_slice()), "{:?} not in {:?}", want, got);
    }
}
