use std::collections::HashSet;

use roxmltree::{Document, Node};

use super::table::{flatten_table, Table};
use super::{CorpusError, Normalizer, ParseReport, ParseWarning, ProcedureDoc};

const PARA_LIKE: &[&str] = &["para", "step", "note", "caution", "warning", "item"];

/// Split a manual source into procedure-level documents.
///
/// Units without a usable `id` (or repeating an earlier one) are skipped and
/// reported as warnings; malformed markup fails the whole source.
pub fn parse_source(source: &str, normalizer: &Normalizer) -> Result<ParseReport, CorpusError> {
    let xml = Document::parse(source).map_err(|e| {
        let pos = e.pos();
        CorpusError::Markup { line: pos.row, column: pos.col, message: e.to_string() }
    })?;

    let mut report = ParseReport::default();
    let mut seen = HashSet::new();
    for node in xml.descendants().filter(|n| n.has_tag_name("procedure")) {
        let pos = xml.text_pos_at(node.range().start);
        let id = node.attribute("id").map(str::trim).unwrap_or("");
        if id.is_empty() {
            report.warnings.push(ParseWarning {
                line: pos.row,
                column: pos.col,
                doc_id: None,
                message: "procedure without id attribute rejected".into(),
            });
            continue;
        }
        if !seen.insert(id.to_string()) {
            report.warnings.push(ParseWarning {
                line: pos.row,
                column: pos.col,
                doc_id: Some(id.to_string()),
                message: format!("duplicate doc_id {id} rejected"),
            });
            continue;
        }
        report.docs.push(build_doc(node, id, normalizer));
    }
    Ok(report)
}

#[derive(Default)]
struct Collected {
    title: String,
    headers: Vec<String>,
    body: Vec<String>,
}

fn build_doc(node: Node<'_, '_>, id: &str, normalizer: &Normalizer) -> ProcedureDoc {
    let mut acc = Collected::default();
    for child in node.children().filter(Node::is_element) {
        if child.has_tag_name("title") && acc.title.is_empty() {
            acc.title = collapse(&inner_text(child));
        } else {
            walk(child, &mut acc);
        }
    }
    let body = acc.body.join("\n");
    let (norm_body, offset_map) = normalizer.normalize(&body);
    ProcedureDoc {
        doc_id: id.to_string(),
        ata_chapter: node.attribute("ata").unwrap_or("").trim().to_string(),
        applicability: node.attribute("applicability").unwrap_or("").trim().to_string(),
        title: normalizer.normalize(&acc.title).0,
        headers: normalizer.normalize(&acc.headers.join("\n")).0,
        body,
        norm_body,
        offset_map,
    }
}

fn walk(node: Node<'_, '_>, acc: &mut Collected) {
    let name = node.tag_name().name();
    match name {
        "header" | "heading" => {
            let text = collapse(&inner_text(node));
            if !text.is_empty() {
                acc.headers.push(text.clone());
                acc.body.push(text);
            }
        }
        "table" => {
            let table = read_table(node);
            if let Some(caption) = &table.caption {
                acc.headers.push(caption.clone());
                acc.body.push(caption.clone());
            }
            if !table.header.is_empty() {
                acc.headers.push(table.header.join("; "));
            }
            let flat = flatten_table(&table);
            if !flat.is_empty() {
                acc.body.push(flat);
            }
        }
        _ if PARA_LIKE.contains(&name) => {
            let text = collapse(&inner_text(node));
            if !text.is_empty() {
                acc.body.push(text);
            }
        }
        _ => {
            for child in node.children().filter(Node::is_element) {
                walk(child, acc);
            }
        }
    }
}

fn read_table(node: Node<'_, '_>) -> Table {
    let mut table = Table::default();
    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "caption" => {
                let c = collapse(&inner_text(child));
                if !c.is_empty() {
                    table.caption = Some(c);
                }
            }
            "head" => table.header = cells(child),
            "row" => table.rows.push(cells(child)),
            _ => {}
        }
    }
    table
}

fn cells(row: Node<'_, '_>) -> Vec<String> {
    row.children()
        .filter(|c| c.has_tag_name("cell"))
        .map(|c| collapse(&inner_text(c)))
        .collect()
}

fn inner_text(node: Node<'_, '_>) -> String {
    node.descendants().filter(Node::is_text).filter_map(|n| n.text()).collect::<Vec<_>>().join("")
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
