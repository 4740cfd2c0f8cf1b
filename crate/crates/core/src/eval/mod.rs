//! Classification metrics, cross-split reports and gradient saliency.

mod metrics;
mod report;
mod saliency;

pub use metrics::{auc, f1_scores, ConfusionCounts, F1Scores};
pub use report::{aggregate_splits, score_split, EvalReport, MeanMetrics, RunMetadata, SplitMetrics};
pub use saliency::{render_text, saliency, saliency_padded, SaliencyMap};
