use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::records::CleanTweet;
use crate::error::{Error, Result};
use crate::text::Vocab;

/// Model-ready example. `event` is the dense index of the example's event among
/// the training events of the split it belongs to, and `None` outside training.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub token_ids: Vec<usize>,
    pub crit: usize,
    pub event: Option<usize>,
    pub event_id: String,
    pub event_type: String,
}

impl LabeledExample {
    pub fn true_length(&self) -> usize {
        self.token_ids.len()
    }
}

/// Maps cleaned records to token ids. Records without tokens are skipped.
pub fn to_examples(records: &[CleanTweet], vocab: &Vocab) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let crit = r.crit_label()?;
        if r.tokens.is_empty() {
            continue;
        }
        out.push(LabeledExample {
            id: r.id.clone(),
            token_ids: vocab.encode(&r.tokens),
            crit,
            event: None,
            event_id: r.event_id.clone(),
            event_type: r.event_type.clone(),
        });
    }
    Ok(out)
}

/// Which disaster types form the pool a leave-one-out protocol runs over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventScope {
    Single(String),
    /// Several types pooled into one synthetic type.
    Mixed(Vec<String>),
}

impl EventScope {
    /// Parses `flood` or `flood+typhoon`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<String> = s
            .split(['+', ','])
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect();
        match parts.len() {
            0 => Err(Error::Config("empty event type".into())),
            1 => Ok(EventScope::Single(parts.into_iter().next().unwrap())),
            _ => Ok(EventScope::Mixed(parts)),
        }
    }

    pub fn contains(&self, event_type: &str) -> bool {
        match self {
            EventScope::Single(t) => t == event_type,
            EventScope::Mixed(ts) => ts.iter().any(|t| t == event_type),
        }
    }

    pub fn name(&self) -> String {
        match self {
            EventScope::Single(t) => t.clone(),
            EventScope::Mixed(ts) => ts.join("+"),
        }
    }
}

/// One leave-one-out partition.
#[derive(Debug, Clone)]
pub struct Split {
    pub held_out_event: String,
    pub scope: String,
    /// Training events; position = dense event index.
    pub events: Vec<String>,
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl Split {
    pub fn event_count(&self) -> usize {
        self.events.len()
    }
}

/// Distinct events within `scope`, sorted.
pub fn events_in_scope(examples: &[LabeledExample], scope: &EventScope) -> Vec<String> {
    examples
        .iter()
        .filter(|e| scope.contains(&e.event_type))
        .map(|e| e.event_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// One split per event in `scope`: that event is the test set and every other
/// event of the scope is training data, with event indices re-densified over
/// the training events.
pub fn make_loo_splits(
    examples: &[LabeledExample],
    scope: &EventScope,
    min_events: usize,
) -> Result<Vec<Split>> {
    let events = events_in_scope(examples, scope);
    if events.len() < min_events.max(2) {
        return Err(Error::Protocol {
            event_type: scope.name(),
            count: events.len(),
            required: min_events.max(2),
        });
    }
    let pool: Vec<&LabeledExample> = examples.iter().filter(|e| scope.contains(&e.event_type)).collect();
    Ok(events
        .iter()
        .map(|held| {
            let train_events: Vec<String> = events.iter().filter(|e| *e != held).cloned().collect();
            let index: BTreeMap<&str, usize> = train_events
                .iter()
                .enumerate()
                .map(|(i, e)| (e.as_str(), i))
                .collect();
            let mut train = Vec::new();
            let mut test = Vec::new();
            for &ex in &pool {
                let mut ex = ex.clone();
                if &ex.event_id == held {
                    ex.event = None;
                    test.push(ex);
                } else {
                    ex.event = Some(index[ex.event_id.as_str()]);
                    train.push(ex);
                }
            }
            Split {
                held_out_event: held.clone(),
                scope: scope.name(),
                events: train_events,
                train,
                test,
            }
        })
        .collect())
}

/// Every event of `scope` except `held_out` (if any) as training data. With
/// no held-out event the test side is empty.
pub fn make_training_split(
    examples: &[LabeledExample],
    scope: &EventScope,
    held_out: Option<&str>,
    min_train_events: usize,
) -> Result<Split> {
    let events = events_in_scope(examples, scope);
    if let Some(h) = held_out {
        if !events.iter().any(|e| e == h) {
            return Err(Error::Config(format!("event {h:?} not found in {}", scope.name())));
        }
    }
    let train_events: Vec<String> = events.iter().filter(|e| Some(e.as_str()) != held_out).cloned().collect();
    if train_events.len() < min_train_events.max(1) {
        return Err(Error::Protocol {
            event_type: scope.name(),
            count: events.len(),
            required: min_train_events.max(1) + usize::from(held_out.is_some()),
        });
    }
    let index: BTreeMap<&str, usize> = train_events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.as_str(), i))
        .collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ex in examples.iter().filter(|e| scope.contains(&e.event_type)) {
        let mut ex = ex.clone();
        match index.get(ex.event_id.as_str()) {
            Some(&i) => {
                ex.event = Some(i);
                train.push(ex);
            }
            None => {
                ex.event = None;
                test.push(ex);
            }
        }
    }
    Ok(Split {
        held_out_event: held_out.unwrap_or_default().to_string(),
        scope: scope.name(),
        events: train_events,
        train,
        test,
    })
}

/// Carves a model-selection set out of training data, stratified by
/// (event, label): each stratum gives up `round(fraction·n)` examples but always
/// keeps at least one for training.
pub fn stratified_holdout(
    examples: Vec<LabeledExample>,
    fraction: f64,
    seed: u64,
) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    let mut strata: BTreeMap<(String, usize), Vec<LabeledExample>> = BTreeMap::new();
    for e in examples {
        strata.entry((e.event_id.clone(), e.crit)).or_default().push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (_, mut group) in strata {
        group.shuffle(&mut rng);
        let n = group.len();
        let k = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
        held.extend(group.drain(..k));
        train.extend(group);
    }
    (train, held)
}
