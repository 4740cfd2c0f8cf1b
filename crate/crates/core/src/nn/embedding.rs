use std::collections::HashSet;
use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::text::{Vocab, PAD, UNK};

/// Standard deviation of the shared out-of-vocabulary vector.
pub const UNK_STD: f64 = 0.1;

/// Word vectors for a [`Vocab`]. Row `PAD` is zero, row `UNK` is a single random
/// vector shared by every token without a pre-trained embedding.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vocab: Vocab,
    matrix: Tensor,
    trainable: bool,
}

/// Parses one GloVe text line into `(token, vector)`.
fn parse_line(line: &str, lineno: usize) -> Result<Option<(&str, Vec<f64>)>> {
    let mut parts = line.split_whitespace();
    let Some(token) = parts.next() else {
        return Ok(None);
    };
    let values = parts
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::data(format!("embedding line {lineno}"), e.to_string()))?;
    if values.is_empty() {
        return Err(Error::data(format!("embedding line {lineno}"), "token without vector"));
    }
    Ok(Some((token, values)))
}

/// Tokens present in a GloVe-format file.
pub fn embedding_tokens<R: BufRead>(r: R) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in r.lines() {
        if let Some(tok) = line?.split_whitespace().next() {
            out.insert(tok.to_string());
        }
    }
    Ok(out)
}

impl EmbeddingTable {
    pub fn new(vocab: Vocab, matrix: Tensor, trainable: bool) -> Result<Self> {
        match matrix.shape() {
            [rows, _] if *rows == vocab.len() => Ok(EmbeddingTable {
                vocab,
                matrix,
                trainable,
            }),
            s => Err(Error::dimension("embedding table", s, &[vocab.len()])),
        }
    }

    /// Builds the table from a GloVe text file (`token v1 … vd` per line).
    /// Vocabulary tokens missing from the file share the UNK row.
    pub fn from_glove<R: BufRead>(vocab: Vocab, r: R, seed: u64) -> Result<Self> {
        let mut dim = None;
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let Some((token, values)) = parse_line(&line, i + 1)? else {
                continue;
            };
            let d = *dim.get_or_insert(values.len());
            if values.len() != d {
                return Err(Error::data(
                    format!("embedding line {}", i + 1),
                    format!("expected {d} values, found {}", values.len()),
                ));
            }
            if vocab.contains(token) {
                let id = vocab.id(token);
                if id != PAD && id != UNK {
                    rows[id] = Some(values);
                }
            }
        }
        let d = dim.ok_or(Error::EmptyInput("embedding file"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, UNK_STD).expect("valid normal");
        let unk: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let mut data = Vec::with_capacity(vocab.len() * d);
        for (id, row) in rows.into_iter().enumerate() {
            match row {
                _ if id == PAD => data.extend(std::iter::repeat_n(0.0, d)),
                Some(v) => data.extend(v),
                None => data.extend_from_slice(&unk),
            }
        }
        let matrix = Tensor::new(vec![vocab.len(), d], data)?;
        Self::new(vocab, matrix, false)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Tensor {
        &mut self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, on: bool) {
        self.trainable = on;
    }

    /// Row-stacked vectors for `ids`, `[len×d]`.
    pub fn lookup(&self, ids: &[usize]) -> Result<Tensor> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("token list"));
        }
        let d = self.dim();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let id = if id < self.vocab.len() { id } else { UNK };
            data.extend_from_slice(self.matrix.row(id));
        }
        Tensor::new(vec![ids.len(), d], data)
    }

    /// Embeds one token sequence as a `[len×d]` node. Frozen tables produce a
    /// constant; trainable ones route gradients back into the table.
    pub fn embed(&self, g: &mut Graph, ids: &[usize]) -> Result<Var> {
        self.embed_with(g, None, ids)
    }

    /// Like [`embed`](Self::embed) but gathers from an already bound table leaf.
    pub fn embed_with(&self, g: &mut Graph, table: Option<Var>, ids: &[usize]) -> Result<Var> {
        match table {
            Some(t) => {
                let ids: Vec<usize> = ids
                    .iter()
                    .map(|&id| if id < self.vocab.len() { id } else { UNK })
                    .collect();
                g.gather_rows(t, &ids)
            }
            None => Ok(g.constant(self.lookup(ids)?)),
        }
    }

    /// Per-timestep inputs for a padded batch: element `t` is `[B×d]` holding
    /// token `t` of every row.
    pub fn embed_batch(&self, g: &mut Graph, table: Option<Var>, ids: &[Vec<usize>]) -> Result<Vec<Var>> {
        let width = ids.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(Error::EmptyInput("batch"));
        }
        (0..width)
            .map(|t| {
                let column: Vec<usize> = ids.iter().map(|row| row[t]).collect();
                self.embed_with(g, table, &column)
            })
            .collect()
    }
}
