use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledExample;
use crate::error::{Error, Result};
use crate::text::PAD;

/// A mini-batch padded with `PAD` to the length of its longest sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub ids: Vec<Vec<usize>>,
    pub lengths: Vec<usize>,
    pub crit: Vec<usize>,
    pub events: Option<Vec<usize>>,
}

impl Batch {
    /// Pads `ids` to a common width.
    pub fn new(ids: Vec<Vec<usize>>, crit: Vec<usize>, events: Option<Vec<usize>>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        if crit.len() != ids.len() || events.as_ref().is_some_and(|e| e.len() != ids.len()) {
            return Err(Error::dimension("batch labels", &[ids.len()], &[crit.len()]));
        }
        if ids.iter().any(Vec::is_empty) {
            return Err(Error::EmptyInput("sequence with no tokens"));
        }
        let lengths: Vec<usize> = ids.iter().map(Vec::len).collect();
        let width = *lengths.iter().max().expect("non-empty");
        let ids = ids
            .into_iter()
            .map(|mut row| {
                row.resize(width, PAD);
                row
            })
            .collect();
        Ok(Batch {
            ids,
            lengths,
            crit,
            events,
        })
    }

    /// Event labels are attached only if every example carries one.
    pub fn from_examples(examples: &[&LabeledExample]) -> Result<Self> {
        let ids = examples.iter().map(|e| e.token_ids.clone()).collect();
        let crit = examples.iter().map(|e| e.crit).collect();
        let events = examples.iter().map(|e| e.event).collect::<Option<Vec<_>>>();
        Self::new(ids, crit, events)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Padded sequence width.
    pub fn width(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }
}

/// Seeded shuffle of `examples` cut into consecutive batches of `batch_size`
/// (the last one may be smaller), each padded to its own longest sequence.
pub fn make_batches(examples: &[LabeledExample], batch_size: usize, seed: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
        .chunks(batch_size)
        .map(|chunk| {
            let refs: Vec<&LabeledExample> = chunk.iter().map(|&i| &examples[i]).collect();
            Batch::from_examples(&refs)
        })
        .collect()
}

/// Batches in input order, for inference.
pub fn sequential_batches(examples: &[LabeledExample], batch_size: usize) -> Result<Vec<Batch>> {
    examples
        .chunks(batch_size.max(1))
        .map(|chunk| Batch::from_examples(&chunk.iter().collect::<Vec<_>>()))
        .collect()
}
