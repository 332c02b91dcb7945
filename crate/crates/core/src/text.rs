//! Shared text utilities.
//!
//! All offsets handed out by this crate are *char* offsets (Unicode scalar
//! values), never byte offsets, so they survive the trip to a browser and
//! back through JSON.

/// Kind of a reader token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Number,
    Punct,
}

/// A token produced by [`tokenize`], with its char span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
    /// A line break separates this token from the previous one.
    pub after_newline: bool,
}

impl Token {
    pub fn is_punct(&self) -> bool {
        self.kind == TokenKind::Punct
    }
}

/// Reader tokenizer: alphanumeric runs, decimal numbers (`3.5`, `10,000`)
/// kept whole, every other non-space char as its own token.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_chars(&text.chars().collect::<Vec<_>>(), 0)
}

/// Tokenize `chars`, shifting every offset by `base`.
pub fn tokenize_chars(chars: &[char], base: usize) -> Vec<Token> {
    let mut out = Vec::new();
    let mut i = 0;
    let mut newline = false;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            if c == '\n' || c == '\r' {
                newline = true;
            }
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_digit() {
            i += 1;
            loop {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let sep = i + 1 < chars.len()
                    && (chars[i] == '.' || chars[i] == ',')
                    && chars[i + 1].is_ascii_digit();
                if sep {
                    i += 1;
                } else {
                    break;
                }
            }
            // "320A" style designators continue as a word
            if i < chars.len() && chars[i].is_alphanumeric() {
                while i < chars.len() && chars[i].is_alphanumeric() {
                    i += 1;
                }
                TokenKind::Word
            } else {
                TokenKind::Number
            }
        } else if c.is_alphanumeric() {
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            TokenKind::Word
        } else {
            i += 1;
            TokenKind::Punct
        };
        out.push(Token {
            text: chars[start..i].iter().collect(),
            start: base + start,
            end: base + i,
            kind,
            after_newline: newline,
        });
        newline = false;
    }
    out
}

/// Index analyzer: lowercase, split on non-alphanumerics, keep digit tokens.
pub fn analyze(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Substring by char offsets `[start, end)`.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start).unwrap_or(text.len());
    let b_end = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b_start
    };
    &text[b_start..b_end]
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}
