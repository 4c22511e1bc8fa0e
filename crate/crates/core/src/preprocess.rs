//! Tweet normalization, tokenization and index encoding.
//!
//! Normalization lowercases the text, strips user mentions (`@USER` and raw
//! `@handle` forms) and URLs (`HTTPURL` and raw `http://`, `https://`,
//! `www.` forms), then collapses whitespace. Removal runs to a fixpoint so
//! that deleting one match can never splice together a new one.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingTable, PAD, UNK};

/// Default sequence cap shared by every model in the pipeline.
pub const DEFAULT_MAX_LENGTH: usize = 512;

static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@[a-z0-9_]+").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:https?://|www\.)\S*|httpurl").unwrap());

pub fn normalize(text: &str) -> String {
    let mut current = text.to_lowercase();
    loop {
        let next = URL.replace_all(&MENTION.replace_all(&current, ""), "").into_owned();
        if next == current {
            break;
        }
        current = next;
    }
    current.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits normalized text into surface tokens.
///
/// Whitespace separates tokens; every other non-word character becomes a
/// token of its own, with two exceptions: `#` directly followed by a word
/// character starts a hashtag token, and `.`/`,` between two digits stays
/// inside the number (`1,000`, `19.5`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut current = String::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            let hashtag_start = c == '#' && current.is_empty() && next.is_some_and(is_word_char);
            let inside_number = (c == '.' || c == ',')
                && current.chars().last().is_some_and(|p| p.is_ascii_digit())
                && next.is_some_and(|n| n.is_ascii_digit());
            if is_word_char(c) || hashtag_start || inside_number {
                current.push(c);
            } else {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            }
            i += 1;
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// An index-encoded tweet, right-padded or clipped to `max_length`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<usize>,
    /// Token count before padding or clipping.
    pub original_length: usize,
    pub max_length: usize,
    /// Positions (within the kept prefix) that fell back to UNK.
    pub oov_count: usize,
}

impl TokenSequence {
    /// Number of real (non-padding) positions.
    pub fn valid_length(&self) -> usize {
        self.original_length.min(self.max_length)
    }
}

/// # Panics
///
/// Panics if `max_length` is zero.
pub fn encode(tokens: &[String], vocab: &EmbeddingTable, max_length: usize) -> TokenSequence {
    assert!(max_length >= 1, "max_length must be at least 1");
    let mut ids = Vec::with_capacity(max_length);
    let mut oov_count = 0;
    for token in tokens.iter().take(max_length) {
        let id = vocab.index_of(token).unwrap_or_else(|| {
            oov_count += 1;
            UNK
        });
        ids.push(id);
    }
    ids.resize(max_length, PAD);
    TokenSequence {
        tokens: ids,
        original_length: tokens.len(),
        max_length,
        oov_count,
    }
}

/// normalize → tokenize → encode.
pub fn prepare(text: &str, vocab: &EmbeddingTable, max_length: usize) -> TokenSequence {
    encode(&tokenize(&normalize(text)), vocab, max_length)
}

/// Fraction of kept positions mapped to UNK across a batch.
pub fn oov_rate(sequences: &[TokenSequence]) -> f64 {
    let kept: usize = sequences.iter().map(TokenSequence::valid_length).sum();
    if kept == 0 {
        return 0.0;
    }
    sequences.iter().map(|s| s.oov_count).sum::<usize>() as f64 / kept as f64
}
