use std::collections::HashSet;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Lowercase alphabetic dictionary used for segmentation and for dropping
/// out-of-dictionary words.
#[derive(Debug, Clone)]
pub struct Wordlist {
    words: HashSet<String>,
    max_len: usize,
}

impl Wordlist {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = HashSet::new();
        for w in words {
            let w = w.into();
            if w.is_empty() || !w.chars().all(|c| c.is_ascii_lowercase()) {
                return Err(Error::data("wordlist", format!("invalid entry {w:?}")));
            }
            set.insert(w);
        }
        if set.is_empty() {
            return Err(Error::EmptyInput("wordlist"));
        }
        let max_len = set.iter().map(String::len).max().unwrap_or(0);
        Ok(Wordlist { words: set, max_len })
    }

    /// Reads a newline-delimited file. Entries are lowercased; lines that are
    /// not purely alphabetic after trimming are skipped.
    pub fn from_reader<R: BufRead>(r: R) -> Result<Self> {
        let mut words = Vec::new();
        for line in r.lines() {
            let w = line?.trim().to_ascii_lowercase();
            if !w.is_empty() && w.chars().all(|c| c.is_ascii_lowercase()) {
                words.push(w);
            }
        }
        Self::new(words)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Splits a run-together token into dictionary words.
///
/// Depth-first search that always tries the longest dictionary prefix first and
/// backtracks on dead ends; the first complete cover is returned. Positions
/// already proven uncoverable are memoized, so the search is quadratic in the
/// token length at worst. If no cover exists the token is returned unchanged.
pub fn segment(token: &str, words: &Wordlist) -> Vec<String> {
    if token.is_empty() {
        return vec![];
    }
    if words.contains(token) || !token.is_ascii() {
        return vec![token.to_string()];
    }
    let mut dead = vec![false; token.len() + 1];
    let mut cuts = Vec::new();
    if cover_from(token, 0, words, &mut dead, &mut cuts) {
        let mut out = Vec::with_capacity(cuts.len());
        let mut start = 0;
        for end in cuts {
            out.push(token[start..end].to_string());
            start = end;
        }
        out
    } else {
        vec![token.to_string()]
    }
}

fn cover_from(
    token: &str,
    start: usize,
    words: &Wordlist,
    dead: &mut [bool],
    cuts: &mut Vec<usize>,
) -> bool {
    if start == token.len() {
        return true;
    }
    if dead[start] {
        return false;
    }
    let longest = (token.len() - start).min(words.max_len());
    for len in (1..=longest).rev() {
        let end = start + len;
        if words.contains(&token[start..end]) {
            cuts.push(end);
            if cover_from(token, end, words, dead, cuts) {
                return true;
            }
            cuts.pop();
        }
    }
    dead[start] = true;
    false
}
