//! Text normalization and tokenization.
//!
//! Normalization runs a fixed sequence of passes:
//! URL removal, mention removal, digit removal, special-character removal,
//! case folding, then whitespace collapsing. A "special character" is any
//! character that is neither alphabetic nor whitespace, which keeps the rule
//! script-agnostic (Latin, German umlauts, Arabic-script Urdu).

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    /// UAX #29 word segmentation.
    #[default]
    UnicodeWords,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub lowercase: bool,
    pub strip_mentions: bool,
    pub strip_urls: bool,
    pub strip_digits: bool,
    pub strip_special: bool,
    pub tokenizer: TokenizerKind,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_mentions: true,
            strip_urls: true,
            strip_digits: true,
            strip_special: true,
            tokenizer: TokenizerKind::UnicodeWords,
        }
    }
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:[a-z][a-z0-9+.\-]*://|www\.)\S*").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@[\p{L}\p{M}\p{N}_]+").unwrap())
}

/// Single-character lowercase mapping. Characters whose lowercase form
/// expands to several characters are kept as they are.
fn simple_lowercase(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub fn normalize(text: &str, cfg: &PrepConfig) -> String {
    let mut s = std::borrow::Cow::Borrowed(text);
    if cfg.strip_urls {
        s = std::borrow::Cow::Owned(url_re().replace_all(&s, " ").into_owned());
    }
    if cfg.strip_mentions {
        s = std::borrow::Cow::Owned(mention_re().replace_all(&s, " ").into_owned());
    }
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if cfg.strip_digits && c.is_numeric() {
            continue;
        }
        let c = if cfg.strip_special && !c.is_alphabetic() && !c.is_whitespace() {
            ' '
        } else {
            c
        };
        out.push(if cfg.lowercase { simple_lowercase(c) } else { c });
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str, cfg: &PrepConfig) -> Vec<String> {
    let words: Box<dyn Iterator<Item = &str>> = match cfg.tokenizer {
        TokenizerKind::UnicodeWords => Box::new(text.unicode_words()),
        TokenizerKind::Whitespace => Box::new(text.split_whitespace()),
    };
    words
        .filter(|t| !t.is_empty() && !t.chars().any(char::is_whitespace))
        .map(str::to_string)
        .collect()
}

/// `normalize` followed by `tokenize`.
pub fn prepare(text: &str, cfg: &PrepConfig) -> Vec<String> {
    tokenize(&normalize(text, cfg), cfg)
}
