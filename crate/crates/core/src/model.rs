//! The three evaluated architectures: baseline, multitask and adversarial.
//!
//! All share an embedding lookup, a stacked LSTM encoder `h` and a criticality
//! head `c_r`. Multitask adds an event head `c_e` on the encoding; adversarial
//! inserts a gradient-reversal layer between the encoding and `c_e`. Losses are
//! unweighted sums of the cross-entropy terms.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Var};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nn::{EmbeddingTable, GradientReversal, LinearHead, Lstm};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Baseline,
    Multitask,
    Adversarial,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::Baseline,
        Architecture::Multitask,
        Architecture::Adversarial,
    ];

    pub fn has_event_head(self) -> bool {
        self != Architecture::Baseline
    }

    /// Events an event type needs for leave-one-out training: one is held out,
    /// and an event head needs at least two training events to discriminate.
    pub fn min_events(self) -> usize {
        if self.has_event_head() {
            3
        } else {
            2
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Baseline => "baseline",
            Architecture::Multitask => "multitask",
            Architecture::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Architecture::Baseline),
            "multitask" => Ok(Architecture::Multitask),
            "adversarial" => Ok(Architecture::Adversarial),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Shape hyperparameters of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    pub lambda: f64,
    pub train_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 100,
            layers: 2,
            lambda: 1.0,
            train_embeddings: false,
        }
    }
}

/// All trainable state of one architecture.
#[derive(Debug, Clone)]
pub struct Classifier {
    architecture: Architecture,
    embedding: EmbeddingTable,
    encoder: Lstm,
    crit_head: LinearHead,
    event_head: Option<LinearHead>,
    reversal: GradientReversal,
    seed: u64,
}

/// Graph handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub loss: Var,
    pub crit_loss: Var,
    pub event_loss: Option<Var>,
    pub crit_logits: Var,
    pub event_logits: Option<Var>,
    pub encoding: Var,
    /// Parameter leaves, in [`Classifier::tensors`] order.
    pub params: Vec<Var>,
    /// Per-timestep input leaves `[B×d]`.
    pub inputs: Vec<Var>,
}

impl Classifier {
    /// Initializes encoder, criticality head and (if any) event head, in that
    /// order, from one RNG stream seeded with `seed`.
    pub fn new(
        architecture: Architecture,
        mut embedding: EmbeddingTable,
        num_events: usize,
        config: &ModelConfig,
        seed: u64,
    ) -> Result<Self> {
        if config.hidden == 0 || config.layers == 0 {
            return Err(Error::Config("hidden size and layer count must be positive".into()));
        }
        if architecture.has_event_head() && num_events < 2 {
            return Err(Error::Config(format!(
                "{architecture} needs at least 2 training events, got {num_events}"
            )));
        }
        let reversal = GradientReversal::new(config.lambda)?;
        embedding.set_trainable(config.train_embeddings);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Lstm::new(embedding.dim(), config.hidden, config.layers, &mut rng);
        let crit_head = LinearHead::new(encoder.output_dim(), 2, &mut rng);
        let event_head = architecture
            .has_event_head()
            .then(|| LinearHead::new(encoder.output_dim(), num_events, &mut rng));
        Ok(Classifier {
            architecture,
            embedding,
            encoder,
            crit_head,
            event_head,
            reversal,
            seed,
        })
    }

    pub fn from_parts(
        architecture: Architecture,
        embedding: EmbeddingTable,
        encoder: Lstm,
        crit_head: LinearHead,
        event_head: Option<LinearHead>,
        reversal: GradientReversal,
        seed: u64,
    ) -> Result<Self> {
        if architecture.has_event_head() != event_head.is_some() {
            return Err(Error::Checkpoint(format!(
                "{architecture} model with event head present = {}",
                event_head.is_some()
            )));
        }
        let width = encoder.output_dim();
        let heads_ok = crit_head.classes() == 2
            && crit_head.input_dim() == width
            && event_head.as_ref().is_none_or(|h| h.input_dim() == width);
        if !heads_ok || encoder.input_dim() != embedding.dim() {
            return Err(Error::Checkpoint("inconsistent layer widths".into()));
        }
        Ok(Classifier {
            architecture,
            embedding,
            encoder,
            crit_head,
            event_head,
            reversal,
            seed,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    pub fn encoder(&self) -> &Lstm {
        &self.encoder
    }

    pub fn crit_head(&self) -> &LinearHead {
        &self.crit_head
    }

    pub fn event_head(&self) -> Option<&LinearHead> {
        self.event_head.as_ref()
    }

    pub fn num_events(&self) -> usize {
        self.event_head.as_ref().map_or(0, LinearHead::classes)
    }

    pub fn reversal(&self) -> GradientReversal {
        self.reversal
    }

    pub fn set_reversal(&mut self, reversal: GradientReversal) {
        self.reversal = reversal;
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Trainable tensors: embedding table (only when fine-tuned), encoder
    /// layers, criticality head, event head.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        if self.embedding.trainable() {
            out.push(self.embedding.matrix());
        }
        out.extend(self.encoder.tensors());
        out.extend(self.crit_head.tensors());
        if let Some(h) = &self.event_head {
            out.extend(h.tensors());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        if self.embedding.trainable() {
            out.push(self.embedding.matrix_mut());
        }
        out.extend(self.encoder.tensors_mut());
        out.extend(self.crit_head.tensors_mut());
        if let Some(h) = &mut self.event_head {
            out.extend(h.tensors_mut());
        }
        out
    }

    /// Number of leading tensors that belong to the shared trunk (embedding,
    /// encoder, criticality head); the rest belong to the event head.
    pub fn trunk_len(&self) -> usize {
        self.tensors().len() - self.event_head.as_ref().map_or(0, |_| 2)
    }

    /// Builds the training loss for a batch. Event labels are required by the
    /// architectures with an event head.
    pub fn forward(&self, g: &mut Graph, batch: &Batch) -> Result<ForwardPass> {
        self.forward_impl(g, batch, false)
    }

    /// Like [`forward`](Self::forward) but the per-timestep inputs are trainable
    /// leaves, so their gradients can be read after `backward`.
    pub fn forward_with_input_grads(&self, g: &mut Graph, batch: &Batch) -> Result<ForwardPass> {
        self.forward_impl(g, batch, true)
    }

    fn forward_impl(&self, g: &mut Graph, batch: &Batch, input_grads: bool) -> Result<ForwardPass> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let events = match (self.architecture.has_event_head(), &batch.events) {
            (true, None) => {
                return Err(Error::Config(format!(
                    "{} training needs event labels",
                    self.architecture
                )))
            }
            (true, Some(ev)) => Some(ev),
            (false, _) => None,
        };

        let table = self.embedding.trainable().then(|| g.param(self.embedding.matrix().clone()));
        let encoder = self.encoder.bind(g);
        let crit = self.crit_head.bind(g);
        let event = self.event_head.as_ref().map(|h| h.bind(g));

        let mut params: Vec<Var> = table.into_iter().collect();
        params.extend(encoder.vars());
        params.extend(crit.vars());
        if let Some(e) = &event {
            params.extend(e.vars());
        }

        let inputs = if input_grads {
            (0..batch.width())
                .map(|t| {
                    let column: Vec<usize> = batch.ids.iter().map(|row| row[t]).collect();
                    Ok(g.param(self.embedding.lookup(&column)?))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            self.embedding.embed_batch(g, table, &batch.ids)?
        };

        let encoding = encoder.encode_batch(g, &inputs, &batch.lengths)?;
        let crit_logits = crit.apply(g, encoding)?;
        let crit_loss = g.softmax_cross_entropy(crit_logits, &batch.crit)?;

        let (event_logits, event_loss, loss) = match (event, events) {
            (Some(head), Some(labels)) => {
                let feed = match self.architecture {
                    Architecture::Adversarial => self.reversal.apply(g, encoding),
                    _ => encoding,
                };
                let logits = head.apply(g, feed)?;
                let l = g.softmax_cross_entropy(logits, labels)?;
                let total = g.add(crit_loss, l)?;
                (Some(logits), Some(l), total)
            }
            _ => (None, None, crit_loss),
        };

        Ok(ForwardPass {
            loss,
            crit_loss,
            event_loss,
            crit_logits,
            event_logits,
            encoding,
            params,
            inputs,
        })
    }

    /// Predicted class and critical-class probability for each row of a batch.
    pub fn predict_batch(&self, batch: &Batch) -> Result<Vec<(usize, f64)>> {
        let mut g = Graph::new();
        let inputs = self.embedding.embed_batch(&mut g, None, &batch.ids)?;
        let encoder = self.encoder.bind(&mut g);
        let crit = self.crit_head.bind(&mut g);
        let encoding = encoder.encode_batch(&mut g, &inputs, &batch.lengths)?;
        let logits = crit.apply(&mut g, encoding)?;
        let t = g.value(logits);
        Ok((0..t.rows())
            .map(|i| {
                let row = t.row(i);
                let (p, _) = crate::autograd::softmax_row(row);
                let class = usize::from(row[1] > row[0]);
                (class, p[1])
            })
            .collect())
    }
}
