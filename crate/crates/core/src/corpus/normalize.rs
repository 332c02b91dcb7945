use std::collections::{BTreeMap, HashMap};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Abbreviation table: case-sensitive token → expansion.
#[derive(Debug, Clone, Default)]
pub struct AbbrevTable {
    entries: BTreeMap<String, String>,
}

impl AbbrevTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &str, expansion: &str) -> Result<(), CorpusError> {
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(CorpusError::Table(format!("abbreviation key {key:?} is empty or contains whitespace")));
        }
        if key == expansion {
            return Err(CorpusError::Table(format!("abbreviation {key:?} maps to itself")));
        }
        self.entries.insert(key.to_string(), expansion.to_string());
        Ok(())
    }

    /// Two-column TSV: `ABBREV<TAB>expansion`. Blank lines and `#` comments skipped.
    pub fn from_tsv(text: &str) -> Result<Self, CorpusError> {
        let mut table = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, exp) = line
                .split_once('\t')
                .ok_or_else(|| CorpusError::Table(format!("line {}: expected two tab-separated columns", lineno + 1)))?;
            table
                .insert(key.trim(), exp.trim())
                .map_err(|e| CorpusError::Table(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// One regex rewrite applied to the whole text. Replacement uses `regex`
/// expansion syntax (`$1`, `${name}`).
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub pattern: Regex,
    pub replacement: String,
}

impl UnitRule {
    pub fn new(pattern: &str, replacement: &str) -> Result<Self, CorpusError> {
        let pattern = Regex::new(pattern).map_err(|e| CorpusError::Table(format!("bad pattern {pattern:?}: {e}")))?;
        Ok(Self { pattern, replacement: replacement.to_string() })
    }

    /// TSV of `pattern<TAB>replacement`, applied in file order.
    pub fn from_tsv(text: &str) -> Result<Vec<Self>, CorpusError> {
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (pat, rep) = line
                .split_once('\t')
                .ok_or_else(|| CorpusError::Table(format!("line {}: expected pattern<TAB>replacement", lineno + 1)))?;
            rules.push(Self::new(pat, rep).map_err(|e| CorpusError::Table(format!("line {}: {e}", lineno + 1)))?);
        }
        Ok(rules)
    }
}

/// Maps every char position of a normalized text to the start of the raw
/// region that produced it. Holds `len + 1` entries: the last one is the raw
/// length, so half-open ranges map cleanly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OffsetMap(Vec<usize>);

impl OffsetMap {
    pub fn identity(len: usize) -> Self {
        Self((0..=len).collect())
    }

    pub fn from_vec(v: Vec<usize>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Number of normalized chars covered.
    pub fn len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn raw_len(&self) -> usize {
        self.0.last().copied().unwrap_or(0)
    }

    pub fn to_raw(&self, pos: usize) -> usize {
        self.0[pos.min(self.0.len() - 1)]
    }

    pub fn is_monotone(&self) -> bool {
        !self.0.is_empty() && self.0.windows(2).all(|w| w[0] <= w[1])
    }

    /// Raw range covering the normalized range `[start, end)`. The end is
    /// widened to the end of whatever raw region produced char `end - 1`.
    pub fn map_range(&self, start: usize, end: usize) -> (usize, usize) {
        let raw_start = self.to_raw(start);
        if end <= start {
            return (raw_start, raw_start);
        }
        let last = self.to_raw(end - 1);
        let raw_end = self.0[end.min(self.0.len() - 1)..]
            .iter()
            .copied()
            .find(|&r| r > last)
            .unwrap_or_else(|| self.raw_len());
        (raw_start, raw_end)
    }
}

/// Abbreviation table plus ordered unit rules.
#[derive(Debug, Clone, Default)]
pub struct Normalizer {
    pub abbrevs: AbbrevTable,
    pub unit_rules: Vec<UnitRule>,
}

impl Normalizer {
    pub fn new(abbrevs: AbbrevTable, unit_rules: Vec<UnitRule>) -> Self {
        Self { abbrevs, unit_rules }
    }

    pub fn normalize(&self, raw: &str) -> (String, OffsetMap) {
        normalize_text(raw, &self.abbrevs, &self.unit_rules)
    }
}

/// Expand abbreviations (whole tokens, longest key first, single pass), then
/// apply unit rules left to right.
pub fn normalize_text(raw: &str, abbrevs: &AbbrevTable, unit_rules: &[UnitRule]) -> (String, OffsetMap) {
    let (mut text, mut map) = expand_abbrevs(raw, abbrevs);
    for rule in unit_rules {
        let (t, m) = apply_rule(&text, &map, rule);
        text = t;
        map = m;
    }
    (text, OffsetMap(map))
}

fn expand_abbrevs(raw: &str, abbrevs: &AbbrevTable) -> (String, Vec<usize>) {
    let chars: Vec<char> = raw.chars().collect();
    if abbrevs.is_empty() {
        return (raw.to_string(), (0..=chars.len()).collect());
    }

    let mut by_first: HashMap<char, Vec<(Vec<char>, &str)>> = HashMap::new();
    for (k, v) in abbrevs.iter() {
        let kc: Vec<char> = k.chars().collect();
        by_first.entry(kc[0]).or_default().push((kc, v));
    }
    for keys in by_first.values_mut() {
        keys.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    }

    let mut out = String::with_capacity(raw.len());
    let mut map = Vec::with_capacity(chars.len() + 1);
    let mut i = 0;
    while i < chars.len() {
        let at_boundary = i == 0 || !chars[i - 1].is_alphanumeric();
        let hit = if at_boundary {
            by_first.get(&chars[i]).and_then(|keys| {
                keys.iter().find(|(k, _)| {
                    let end = i + k.len();
                    end <= chars.len()
                        && chars[i..end] == k[..]
                        && (end == chars.len() || !chars[end].is_alphanumeric())
                })
            })
        } else {
            None
        };
        match hit {
            Some((k, exp)) => {
                for c in exp.chars() {
                    out.push(c);
                    map.push(i);
                }
                i += k.len();
            }
            None => {
                out.push(chars[i]);
                map.push(i);
                i += 1;
            }
        }
    }
    map.push(chars.len());
    (out, map)
}

fn apply_rule(text: &str, map: &[usize], rule: &UnitRule) -> (String, Vec<usize>) {
    let mut out = String::with_capacity(text.len());
    let mut new_map = Vec::with_capacity(map.len());
    // byte cursor and char cursor advance together
    let mut byte_pos = 0;
    let mut char_pos = 0;
    for caps in rule.pattern.captures_iter(text) {
        let m = caps.get(0).expect("group 0");
        for c in text[byte_pos..m.start()].chars() {
            out.push(c);
            new_map.push(map[char_pos]);
            char_pos += 1;
        }
        let region_start = map[char_pos];
        let mut expanded = String::new();
        caps.expand(&rule.replacement, &mut expanded);
        for c in expanded.chars() {
            out.push(c);
            new_map.push(region_start);
        }
        char_pos += text[m.start()..m.end()].chars().count();
        byte_pos = m.end();
    }
    for c in text[byte_pos..].chars() {
        out.push(c);
        new_map.push(map[char_pos]);
        char_pos += 1;
    }
    new_map.push(map[char_pos]);
    (out, new_map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xwind() -> AbbrevTable {
        let mut t = AbbrevTable::new();
        t.insert("XWIND", "crosswind").unwrap();
        t
    }

    #[test]
    fn expands_abbrev_and_units() {
        let rules = vec![UnitRule::new(r"(\d+)KT", "$1 kt").unwrap()];
        let (norm, map) = normalize_text("MAX XWIND 38KT", &xwind(), &rules);
        assert_eq!(norm, "MAX crosswind 38 kt");
        assert!(map.is_monotone());
        assert_eq!(map.len(), norm.chars().count());
        // every char of "crosswind" points at the start of "XWIND"
        assert!((4..13).all(|p| map.to_raw(p) == 4));
        // the unit region collapses onto "38KT"
        assert!((14..19).all(|p| map.to_raw(p) == 10));
        assert_eq!(map.map_range(14, 19), (10, 14));
        assert_eq!(map.map_range(4, 13), (4, 9));
    }

    #[test]
    fn identity_without_tables() {
        let (norm, map) = normalize_text("Engine 1 FIRE", &AbbrevTable::new(), &[]);
        assert_eq!(norm, "Engine 1 FIRE");
        assert_eq!(map, OffsetMap::identity(13));
        let (norm, map) = normalize_text("", &AbbrevTable::new(), &[]);
        assert_eq!(norm, "");
        assert_eq!(map, OffsetMap::identity(0));
    }

    #[test]
    fn whole_token_only() {
        let (norm, _) = normalize_text("TAXWIND XWINDS XWIND.", &xwind(), &[]);
        assert_eq!(norm, "TAXWIND XWINDS crosswind.");
    }

    #[test]
    fn longest_key_first() {
        let mut t = AbbrevTable::new();
        t.insert("L", "left").unwrap();
        t.insert("L/G", "landing gear").unwrap();
        let (norm, _) = normalize_text("L/G and L ENG", &t, &[]);
        assert_eq!(norm, "landing gear and left ENG");
    }

    #[test]
    fn single_pass() {
        let mut t = AbbrevTable::new();
        t.insert("A", "B").unwrap();
        t.insert("B", "C").unwrap();
        assert_eq!(normalize_text("A B", &t, &[]).0, "B C");
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(AbbrevTable::from_tsv("APU\tAPU\n").is_err());
        assert!(AbbrevTable::from_tsv("A B\tx\n").is_err());
        assert!(AbbrevTable::from_tsv("nocolumns\n").is_err());
        assert!(UnitRule::from_tsv("(\\d+\tx\n").is_err());
        let t = AbbrevTable::from_tsv("# comment\n\nENG\tengine\n").unwrap();
        assert_eq!(t.get("ENG"), Some("engine"));
    }

    #[test]
    fn map_range_widens_to_region_end() {
        let (_, map) = normalize_text("XWIND", &xwind(), &[]);
        // "cross" lies inside the expansion; the whole raw token is returned
        assert_eq!(map.map_range(0, 5), (0, 5));
        assert_eq!(map.map_range(3, 3), (0, 0));
    }
}
