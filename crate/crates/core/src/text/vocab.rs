use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id mapping. Ids 0 and 1 are reserved for padding and unknown tokens;
/// the remaining tokens are stored in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_sorted<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(words);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    /// Every distinct corpus token.
    pub fn from_corpus<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<Self> {
        let words: BTreeSet<String> = corpus
            .iter()
            .flatten()
            .map(|t| t.as_ref().to_string())
            .collect();
        if words.is_empty() {
            return Err(Error::EmptyInput("vocabulary corpus"));
        }
        Ok(Self::from_sorted(words))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
        Self::from_tokens(lines)
    }

    /// Rebuilds a vocabulary from its full token list, reserved tokens included.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::data("vocab", "token list must start with <pad> and <unk>"));
        }
        let vocab = Self::from_sorted(tokens.into_iter().skip(2));
        if vocab.index.len() != vocab.tokens.len() {
            return Err(Error::data("vocab", "duplicate tokens"));
        }
        Ok(vocab)
    }

    /// Hex SHA-256 of the serialized vocabulary.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex_digest(&h.finalize())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Vocabulary of corpus tokens that also have a pre-trained embedding, plus PAD and UNK.
pub fn build_vocab<S: AsRef<str>>(
    corpus: &[Vec<S>],
    embedding_tokens: &HashSet<String>,
) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("vocabulary corpus"));
    }
    let words: BTreeSet<String> = corpus
        .iter()
        .flatten()
        .map(|t| t.as_ref())
        .filter(|t| embedding_tokens.contains(*t))
        .map(str::to_string)
        .collect();
    if words.is_empty() {
        return Err(Error::data(
            "vocab",
            "no corpus token has an embedding; check the embedding file",
        ));
    }
    Ok(Vocab::from_sorted(words))
}
