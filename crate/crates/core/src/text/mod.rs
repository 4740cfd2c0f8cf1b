//! Text cleaning, word segmentation and vocabulary construction for short posts.

mod clean;
mod segment;
mod vocab;

pub use clean::clean;
pub use segment::{segment, Wordlist};
pub use vocab::{build_vocab, Vocab, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

pub(crate) use vocab::hex_digest;

/// Retweet marker; kept even when the wordlist lacks it.
pub const RETWEET: &str = "rt";

/// Splits cleaned text into tokens: numerals and dictionary words are kept,
/// run-together words are segmented, and anything that cannot be covered by
/// dictionary words is dropped.
pub fn tokenize(cleaned: &str, words: &Wordlist) -> Vec<String> {
    let mut out = Vec::new();
    for tok in cleaned.split_whitespace() {
        if tok == RETWEET || tok.chars().all(|c| c.is_ascii_digit()) || words.contains(tok) {
            out.push(tok.to_string());
            continue;
        }
        if !tok.chars().all(|c| c.is_ascii_lowercase()) {
            // mixed letters and digits, e.g. "m7"
            continue;
        }
        let parts = segment(tok, words);
        if parts.iter().all(|p| words.contains(p)) {
            out.extend(parts);
        }
    }
    out
}

/// `clean` followed by `tokenize`.
pub fn preprocess(text: &str, words: &Wordlist) -> Vec<String> {
    tokenize(&clean(text), words)
}
