//! Mini-batch training with per-epoch model selection.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::autograd::Graph;
use crate::data::{make_batches, sequential_batches, Batch, LabeledExample, CRITICAL};
use crate::error::{Error, Result};
use crate::eval::{f1_scores, F1Scores};
use crate::model::Classifier;
use crate::optim::{clip_global_norm, Adam};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Global-norm clip, applied separately to the trunk and to the event head.
    pub clip_norm: Option<f64>,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 40,
            learning_rate: 0.01,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("invalid clip norm {c}")));
            }
        }
        Ok(())
    }

    fn epoch_seed(&self, epoch: usize) -> u64 {
        self.seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    CriticalF1,
    /// Used when the selection data contains no critical example.
    MacroF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Mean event-head loss, for architectures with an event head.
    pub mean_event_loss: Option<f64>,
    pub dev_critical_f1: f64,
    pub dev_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub selection_metric: SelectionMetric,
    pub best_epoch: usize,
    pub best_score: f64,
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Classifier,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub crit_loss: f64,
    pub event_loss: Option<f64>,
}

/// A model plus its optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: Classifier,
    adam: Adam,
    clip_norm: Option<f64>,
}

impl Trainer {
    pub fn new(model: Classifier, learning_rate: f64, clip_norm: Option<f64>) -> Self {
        Trainer {
            model,
            adam: Adam::new(learning_rate),
            clip_norm,
        }
    }

    pub fn model(&self) -> &Classifier {
        &self.model
    }

    pub fn into_model(self) -> Classifier {
        self.model
    }

    /// Gradients of the batch loss, in [`Classifier::tensors`] order.
    pub fn gradients(&self, batch: &Batch) -> Result<(Vec<Tensor>, StepStats)> {
        let mut g = Graph::new();
        let fp = self.model.forward(&mut g, batch)?;
        let scalar = |v| g.value(v).data()[0];
        let stats = StepStats {
            loss: scalar(fp.loss),
            crit_loss: scalar(fp.crit_loss),
            event_loss: fp.event_loss.map(scalar),
        };
        if !stats.loss.is_finite() || stats.loss < 0.0 {
            return Err(Error::NonFiniteGradient {
                step: self.adam.steps() as usize + 1,
            });
        }
        g.backward(fp.loss)?;
        Ok((fp.params.iter().map(|&v| g.grad(v)).collect(), stats))
    }

    /// One optimizer step on `batch`.
    pub fn step(&mut self, batch: &Batch) -> Result<StepStats> {
        let (mut grads, stats) = self.gradients(batch)?;
        if let Some(max) = self.clip_norm {
            let trunk = self.model.trunk_len();
            let (shared, adversary) = grads.split_at_mut(trunk);
            clip_global_norm(shared, max);
            clip_global_norm(adversary, max);
        }
        let mut params = self.model.tensors_mut();
        self.adam.step(&mut params, &grads)?;
        Ok(stats)
    }
}

/// Predicted class and critical probability per example, in input order.
pub fn predict(model: &Classifier, examples: &[LabeledExample]) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(examples.len());
    for batch in sequential_batches(examples, 64)? {
        out.extend(model.predict_batch(&batch)?);
    }
    Ok(out)
}

pub fn evaluate(model: &Classifier, examples: &[LabeledExample]) -> Result<F1Scores> {
    let preds: Vec<usize> = predict(model, examples)?.into_iter().map(|p| p.0).collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.crit).collect();
    f1_scores(&preds, &labels)
}

/// Trains for `config.epochs` epochs and returns the snapshot with the best
/// selection score on `eval`; ties keep the earlier epoch.
pub fn train(
    model: Classifier,
    train: &[LabeledExample],
    eval: &[LabeledExample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training data"));
    }
    if eval.is_empty() {
        return Err(Error::EmptyInput("model-selection data"));
    }
    if model.architecture().has_event_head() {
        let n = model.num_events();
        if let Some(bad) = train.iter().find(|e| e.event.is_none_or(|i| i >= n)) {
            return Err(Error::data(
                &bad.id,
                format!("missing or out-of-range event index for {} training events", n),
            ));
        }
    }
    let selection_metric = if eval.iter().any(|e| e.crit == CRITICAL) {
        SelectionMetric::CriticalF1
    } else {
        warn!("selection data has no critical examples; selecting on macro F1");
        SelectionMetric::MacroF1
    };

    let mut trainer = Trainer::new(model, config.learning_rate, config.clip_norm);
    let mut best: Option<(usize, f64, Classifier)> = None;
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let batches = make_batches(train, config.batch_size, config.epoch_seed(epoch))?;
        let mut total = 0.0;
        let mut event_total = None;
        for batch in &batches {
            let stats = trainer.step(batch)?;
            total += stats.loss;
            if let Some(l) = stats.event_loss {
                *event_total.get_or_insert(0.0) += l;
            }
        }
        let scores = evaluate(trainer.model(), eval)?;
        let score = match selection_metric {
            SelectionMetric::CriticalF1 => scores.critical_f1,
            SelectionMetric::MacroF1 => scores.macro_f1,
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            mean_loss: total / batches.len() as f64,
            mean_event_loss: event_total.map(|t| t / batches.len() as f64),
            dev_critical_f1: scores.critical_f1,
            dev_macro_f1: scores.macro_f1,
        };
        debug!("{record:?}");
        records.push(record);
        if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            best = Some((epoch + 1, score, trainer.model().clone()));
        }
    }
    let (best_epoch, best_score, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best: best_model,
        history: TrainHistory {
            epochs: records,
            selection_metric,
            best_epoch,
            best_score,
            clip_norm: config.clip_norm,
        },
    })
}
