//! Leave-one-out driver: preprocessing, per-split training and scoring.

use std::collections::{BTreeMap, HashSet};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{make_loo_splits, stratified_holdout, CleanTweet, EventScope, Label4, LabeledExample, RawTweet, Split};
use crate::error::{Error, Result};
use crate::eval::{aggregate_splits, score_split, EvalReport, RunMetadata, SplitMetrics};
use crate::model::{Architecture, Classifier, ModelConfig};
use crate::nn::EmbeddingTable;
use crate::text::{clean, hex_digest, tokenize, Wordlist};
use crate::train::{predict, train, TrainConfig, TrainHistory, TrainOutcome};

/// Cleans and tokenizes raw records. Records left without tokens are dropped;
/// unknown labels and duplicate ids are data errors.
pub fn preprocess_records(raw: &[RawTweet], words: &Wordlist) -> Result<Vec<CleanTweet>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("no records"));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        Label4::parse(&r.label, &r.id)?;
        if !seen.insert(r.id.as_str()) {
            return Err(Error::data(&r.id, "duplicate id"));
        }
        let text = clean(&r.text);
        let tokens = tokenize(&text, words);
        if tokens.is_empty() {
            continue;
        }
        out.push(CleanTweet {
            id: r.id.clone(),
            text,
            tokens,
            event_id: r.event_id.clone(),
            event_type: r.event_type.clone(),
            label: r.label.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Share of each training event, per label, kept aside for model selection.
    pub dev_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            dev_fraction: 0.1,
        }
    }
}

impl ExperimentConfig {
    /// Flat key/value view, as echoed into manifests and reports.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("hidden".into(), self.model.hidden.to_string());
        m.insert("layers".into(), self.model.layers.to_string());
        m.insert("lambda".into(), self.model.lambda.to_string());
        m.insert("train_embeddings".into(), self.model.train_embeddings.to_string());
        m.insert("batch_size".into(), self.train.batch_size.to_string());
        m.insert("epochs".into(), self.train.epochs.to_string());
        m.insert("learning_rate".into(), self.train.learning_rate.to_string());
        m.insert(
            "clip_norm".into(),
            self.train.clip_norm.map_or("none".into(), |c| c.to_string()),
        );
        m.insert("dev_fraction".into(), self.dev_fraction.to_string());
        m
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::Config(format!(
                "dev fraction must lie in (0, 1), got {}",
                self.dev_fraction
            )));
        }
        Ok(())
    }
}

/// Hex SHA-256 of raw bytes, used to fingerprint run inputs.
pub fn content_digest(bytes: &[u8]) -> String {
    hex_digest(&Sha256::digest(bytes))
}

/// Hex SHA-256 over sorted `key=value` lines.
pub fn config_hash(map: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in map {
        h.update(format!("{k}={v}\n").as_bytes());
    }
    hex_digest(&h.finalize())
}

/// Per-split seed, so every split has its own initialization and data order
/// while all architectures share them.
pub fn split_seed(seed: u64, held_out_event: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{held_out_event}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone)]
pub struct SplitRun {
    pub metrics: SplitMetrics,
    pub history: TrainHistory,
    pub model: Classifier,
}

/// Trains one architecture on the training side of a split, selecting the
/// epoch on a stratified slice of it.
pub fn train_split(
    architecture: Architecture,
    embedding: &EmbeddingTable,
    split: &Split,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    let s = split_seed(seed, &split.held_out_event);
    let (train_set, dev) = stratified_holdout(split.train.clone(), config.dev_fraction, s);
    let model = Classifier::new(architecture, embedding.clone(), split.event_count(), &config.model, s)?;
    let train_cfg = TrainConfig {
        seed: s,
        ..config.train.clone()
    };
    train(model, &train_set, &dev, &train_cfg)
}

/// Trains one architecture on a split and scores it on the held-out event.
pub fn run_split(
    architecture: Architecture,
    embedding: &EmbeddingTable,
    split: &Split,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<SplitRun> {
    let outcome = train_split(architecture, embedding, split, config, seed)?;
    let preds = predict(&outcome.best, &split.test)?;
    let labels: Vec<usize> = split.test.iter().map(|e| e.crit).collect();
    let mut metrics = score_split(&split.held_out_event, &preds, &labels)?;
    metrics.best_epoch = Some(outcome.history.best_epoch);
    info!(
        "{architecture} held out {}: critical F1 {:.4}, macro F1 {:.4}",
        split.held_out_event, metrics.critical_f1, metrics.macro_f1
    );
    Ok(SplitRun {
        metrics,
        history: outcome.history,
        model: outcome.best,
    })
}

/// Builds the leave-one-out splits of `scope`, checking the event-count
/// requirement of `architecture` before anything is trained.
pub fn loo_splits(
    architecture: Architecture,
    examples: &[LabeledExample],
    scope: &EventScope,
) -> Result<Vec<Split>> {
    make_loo_splits(examples, scope, architecture.min_events())
}

/// Runs every split in order and aggregates the held-out metrics.
pub fn run_loo(
    architecture: Architecture,
    embedding: &EmbeddingTable,
    splits: &[Split],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(EvalReport, Vec<SplitRun>)> {
    config.validate()?;
    let runs = splits
        .iter()
        .map(|split| run_split(architecture, embedding, split, config, seed))
        .collect::<Result<Vec<_>>>()?;
    let report = loo_report(architecture, splits, config, seed, runs.iter().map(|r| r.metrics.clone()).collect())?;
    Ok((report, runs))
}

/// Aggregates per-split metrics, in split order, into a report.
pub fn loo_report(
    architecture: Architecture,
    splits: &[Split],
    config: &ExperimentConfig,
    seed: u64,
    metrics: Vec<SplitMetrics>,
) -> Result<EvalReport> {
    let settings = config.to_map();
    let metadata = RunMetadata {
        architecture: architecture.to_string(),
        scope: splits.first().map(|s| s.scope.clone()).unwrap_or_default(),
        seed,
        config_hash: config_hash(&settings),
        config: settings,
        split_manifest: splits.iter().map(|s| s.held_out_event.clone()).collect(),
    };
    aggregate_splits(metadata, metrics)
}
