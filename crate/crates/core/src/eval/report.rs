use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, f1_scores};
use crate::data::CRITICAL;
use crate::error::{Error, Result};

/// Held-out metrics of one leave-one-out split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub held_out_event: String,
    pub examples: usize,
    pub critical_examples: usize,
    pub macro_f1: f64,
    pub non_critical_f1: f64,
    pub critical_f1: f64,
    /// Undefined when the held-out event has a single class.
    pub auc: Option<f64>,
    pub best_epoch: Option<usize>,
}

/// Scores held-out predictions `(class, p_critical)` against `labels`.
pub fn score_split(
    held_out_event: &str,
    predictions: &[(usize, f64)],
    labels: &[usize],
) -> Result<SplitMetrics> {
    let classes: Vec<usize> = predictions.iter().map(|p| p.0).collect();
    let probs: Vec<f64> = predictions.iter().map(|p| p.1).collect();
    let f1 = f1_scores(&classes, labels)?;
    let critical_examples = labels.iter().filter(|&&y| y == CRITICAL).count();
    let auc = if critical_examples == 0 || critical_examples == labels.len() {
        None
    } else {
        Some(auc(&probs, labels)?)
    };
    Ok(SplitMetrics {
        held_out_event: held_out_event.to_string(),
        examples: labels.len(),
        critical_examples,
        macro_f1: f1.macro_f1,
        non_critical_f1: f1.non_critical_f1,
        critical_f1: f1.critical_f1,
        auc,
        best_epoch: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub macro_f1: f64,
    pub non_critical_f1: f64,
    pub critical_f1: f64,
    /// Mean over the splits where AUC is defined.
    pub auc: Option<f64>,
}

/// What produced a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub architecture: String,
    pub scope: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    /// Held-out event of each split, in split order.
    pub split_manifest: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: RunMetadata,
    pub splits: Vec<SplitMetrics>,
    pub mean: MeanMetrics,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Sums in sorted order so the mean does not depend on split order.
fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Unweighted mean of every metric across splits; per-split rows are kept.
pub fn aggregate_splits(metadata: RunMetadata, splits: Vec<SplitMetrics>) -> Result<EvalReport> {
    if splits.is_empty() {
        return Err(Error::Evaluation("no split reports to aggregate".into()));
    }
    let col = |f: fn(&SplitMetrics) -> f64| mean(splits.iter().map(f)).expect("non-empty");
    let mean = MeanMetrics {
        macro_f1: col(|s| s.macro_f1),
        non_critical_f1: col(|s| s.non_critical_f1),
        critical_f1: col(|s| s.critical_f1),
        auc: mean(splits.iter().filter_map(|s| s.auc)),
    };
    Ok(EvalReport {
        metadata,
        splits,
        mean,
    })
}
