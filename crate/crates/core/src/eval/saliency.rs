use serde::{Deserialize, Serialize};

use crate::autograd::{softmax_row, Graph};
use crate::data::{Batch, LabeledExample};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::text::PAD;

/// Per-token sensitivity of the criticality loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub id: String,
    pub tokens: Vec<String>,
    /// L2 norm of the loss gradient with respect to each token's embedding.
    pub scores: Vec<f64>,
    /// The full gradient, one row per token.
    pub gradients: Vec<Vec<f64>>,
    pub predicted: usize,
    pub true_class: usize,
}

impl SaliencyMap {
    /// Share of this tweet's total saliency that falls on tokens matching
    /// `pred`; `None` when every score is zero.
    pub fn mass_fraction(&self, pred: impl Fn(&str) -> bool) -> Option<f64> {
        let total: f64 = self.scores.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let part: f64 = self
            .tokens
            .iter()
            .zip(&self.scores)
            .filter(|(t, _)| pred(t))
            .map(|(_, s)| s)
            .sum();
        Some(part / total)
    }
}

/// Gradient of the criticality loss at the true label with respect to each
/// input embedding, from one forward and backward pass.
pub fn saliency(model: &Classifier, example: &LabeledExample) -> Result<SaliencyMap> {
    saliency_padded(model, example, example.token_ids.len())
}

/// As [`saliency`], with the sequence right-padded to `width`.
pub fn saliency_padded(model: &Classifier, example: &LabeledExample, width: usize) -> Result<SaliencyMap> {
    let len = example.token_ids.len();
    if len == 0 || example.token_ids.iter().all(|&t| t == PAD) {
        return Err(Error::EmptyInput("saliency example"));
    }
    let mut ids = example.token_ids.clone();
    ids.resize(width.max(len), PAD);
    // The event label only feeds the event loss, which is not differentiated here.
    let events = model.architecture().has_event_head().then(|| vec![0]);
    let batch = Batch {
        ids: vec![ids],
        lengths: vec![len],
        crit: vec![example.crit],
        events,
    };
    let mut g = Graph::new();
    let fp = model.forward_with_input_grads(&mut g, &batch)?;
    g.backward(fp.crit_loss)?;
    let gradients: Vec<Vec<f64>> = fp.inputs[..len].iter().map(|&v| g.grad(v).into_data()).collect();
    let scores = gradients
        .iter()
        .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let (probs, _) = softmax_row(g.value(fp.crit_logits).row(0));
    let vocab = model.embedding().vocab();
    Ok(SaliencyMap {
        id: example.id.clone(),
        tokens: example.token_ids.iter().map(|&t| vocab.token(t).to_string()).collect(),
        scores,
        gradients,
        predicted: usize::from(probs[1] > probs[0]),
        true_class: example.crit,
    })
}

const SHADES: [char; 5] = [' ', '░', '▒', '▓', '█'];

/// One line per token with its raw score and a shade from min-max normalized
/// scores.
pub fn render_text(map: &SaliencyMap) -> String {
    let lo = map.scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = map.tokens.iter().map(String::len).max().unwrap_or(0);
    let mut out = format!("{} predicted={} true={}\n", map.id, map.predicted, map.true_class);
    for (tok, &s) in map.tokens.iter().zip(&map.scores) {
        let norm = if hi > lo { (s - lo) / (hi - lo) } else { 0.0 };
        let shade = SHADES[((norm * (SHADES.len() - 1) as f64).round() as usize).min(SHADES.len() - 1)];
        let bar: String = std::iter::repeat_n(shade, 8).collect();
        out.push_str(&format!("{tok:<width$}  {s:.6e}  {bar}\n"));
    }
    out
}
