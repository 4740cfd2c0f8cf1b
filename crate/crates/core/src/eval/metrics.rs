use serde::{Deserialize, Serialize};

use crate::data::CRITICAL;
use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn for_class(predictions: &[usize], labels: &[usize], class: usize) -> Self {
        let mut c = ConfusionCounts::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p == class, y == class) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// `2PR/(P+R)`; zero when the class is never predicted or never present,
    /// or when precision and recall are both zero.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        let p = self.tp as f64 / (self.tp + self.fp) as f64;
        let r = self.tp as f64 / (self.tp + self.fn_) as f64;
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub non_critical_f1: f64,
    pub critical_f1: f64,
}

/// Per-class and macro F1 of a binary task.
pub fn f1_scores(predictions: &[usize], labels: &[usize]) -> Result<F1Scores> {
    if predictions.is_empty() {
        return Err(Error::Evaluation("no predictions to score".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().chain(predictions).find(|&&y| y > 1) {
        return Err(Error::Evaluation(format!("class {bad} is not binary")));
    }
    let non_critical_f1 = ConfusionCounts::for_class(predictions, labels, 0).f1();
    let critical_f1 = ConfusionCounts::for_class(predictions, labels, CRITICAL).f1();
    Ok(F1Scores {
        macro_f1: (non_critical_f1 + critical_f1) / 2.0,
        non_critical_f1,
        critical_f1,
    })
}

/// ROC AUC of `scores` for the critical class via the Mann-Whitney rank sum,
/// with tied scores sharing their average rank.
pub fn auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&y| y == CRITICAL).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Evaluation("AUC undefined: only one class present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] == CRITICAL {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}
