//! Single-file model container.
//!
//! Layout: the magic `DEBIASCK`, a little-endian `u32` format version, a `u64`
//! header length, a JSON header, then every tensor as little-endian `f64` in
//! header order.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Architecture, Classifier, ModelConfig};
use crate::nn::{EmbeddingTable, GradientReversal, LinearHead, Lstm, LstmLayer};
use crate::tensor::Tensor;
use crate::text::Vocab;

pub const MAGIC: &[u8; 8] = b"DEBIASCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub model: ModelConfig,
    pub seed: u64,
    pub num_events: usize,
    pub vocab_hash: String,
    pub vocab: Vec<String>,
    /// Free-form run settings recorded alongside the weights.
    pub config: BTreeMap<String, String>,
    pub tensors: Vec<TensorEntry>,
}

fn named_tensors(model: &Classifier) -> Vec<(String, &Tensor)> {
    let mut out = vec![("embedding".to_string(), model.embedding().matrix())];
    for (i, l) in model.encoder().layers().iter().enumerate() {
        out.push((format!("encoder.{i}.w"), &l.w));
        out.push((format!("encoder.{i}.u"), &l.u));
        out.push((format!("encoder.{i}.b"), &l.b));
    }
    out.push(("crit.weights".into(), &model.crit_head().weights));
    out.push(("crit.bias".into(), &model.crit_head().bias));
    if let Some(h) = model.event_head() {
        out.push(("event.weights".into(), &h.weights));
        out.push(("event.bias".into(), &h.bias));
    }
    out
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &Classifier, config: &BTreeMap<String, String>) -> Result<()> {
    let tensors = named_tensors(model);
    let vocab = model.embedding().vocab();
    let header = CheckpointHeader {
        architecture: model.architecture(),
        model: ModelConfig {
            hidden: model.encoder().hidden(),
            layers: model.encoder().num_layers(),
            lambda: model.reversal().lambda(),
            train_embeddings: model.embedding().trainable(),
        },
        seed: model.seed(),
        num_events: model.num_events(),
        vocab_hash: vocab.content_hash(),
        vocab: vocab.tokens().to_vec(),
        config: config.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, t) in tensors {
        for x in t.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads only the header, leaving the reader positioned at the tensor data.
pub fn read_header<R: Read>(r: &mut R) -> Result<CheckpointHeader> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    Ok(serde_json::from_slice(&json)?)
}

/// Reads a model and the recorded run settings.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Classifier, CheckpointHeader)> {
    let header = read_header(&mut r)?;
    let mut tensors = BTreeMap::new();
    for entry in &header.tensors {
        let n: usize = entry.shape.iter().product();
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Checkpoint(format!("truncated data for {}", entry.name)))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.insert(entry.name.clone(), Tensor::new(entry.shape.clone(), data)?);
    }
    let mut take = |name: &str| {
        tensors
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    };

    let vocab = Vocab::from_tokens(header.vocab.clone())?;
    if vocab.content_hash() != header.vocab_hash {
        return Err(Error::Checkpoint("vocabulary does not match its recorded hash".into()));
    }
    let embedding = EmbeddingTable::new(vocab, take("embedding")?, header.model.train_embeddings)?;
    let mut layers = Vec::with_capacity(header.model.layers);
    for i in 0..header.model.layers {
        layers.push(LstmLayer {
            w: take(&format!("encoder.{i}.w"))?,
            u: take(&format!("encoder.{i}.u"))?,
            b: take(&format!("encoder.{i}.b"))?,
        });
    }
    let encoder = Lstm::from_layers(layers)?;
    let crit = LinearHead::from_parts(take("crit.weights")?, take("crit.bias")?)?;
    let event = if header.architecture.has_event_head() {
        Some(LinearHead::from_parts(take("event.weights")?, take("event.bias")?)?)
    } else {
        None
    };
    let model = Classifier::from_parts(
        header.architecture,
        embedding,
        encoder,
        crit,
        event,
        GradientReversal::new(header.model.lambda)?,
        header.seed,
    )?;
    Ok((model, header))
}
