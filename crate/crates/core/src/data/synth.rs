//! Synthetic crisis corpora with a planted event-specific shortcut.
//!
//! Every tweet is a bag of tokens drawn from four pools: generic signal words
//! that mark critical tweets in every event, neutral filler, a per-type context
//! word, and per-event tokens (place names). In biased events the place names
//! co-occur with the critical label; in the designated unbiased event they are
//! independent of it. Place-name vectors share a common direction, so a model
//! that learns "a place is mentioned" carries that shortcut to unseen events.
//! Types may additionally own signal words that are neutral noise in the other
//! types, which ties the meaning of a word to the type.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::records::RawTweet;
use crate::error::{Error, Result};

const SIGNAL_WORDS: &[&str] = &[
    "evacuate", "casualties", "trapped", "injured", "rescue", "missing", "collapsed", "emergency",
    "urgent", "killed", "stranded", "shelter", "wounded", "destroyed", "fatalities", "survivors",
    "victims", "damage", "blocked", "sos", "dead", "bleeding", "burning", "drowning", "buried",
    "hospital", "ambulance", "medics", "evacuation", "looting", "outage", "contaminated",
];

const FILLER_WORDS: &[&str] = &[
    "pray", "thoughts", "news", "watch", "people", "today", "video", "update", "live", "photos",
    "please", "share", "everyone", "stay", "safe", "wow", "just", "saw", "morning", "night",
    "still", "here", "there", "tonight", "community", "support", "hope", "love", "city", "area",
    "report", "says", "new", "latest", "week", "day", "time", "know", "think", "look", "story",
    "hearts", "sad", "terrible", "world", "follow", "via", "breaking", "coverage", "family",
    "friends", "streets", "weather", "officials", "local", "government", "said", "more", "after",
    "before", "near", "around", "many", "some", "all", "our", "your", "their", "with", "from",
    "about", "over", "this", "that", "what", "when", "where", "who", "why", "how",
];

const ONSETS: &[&str] = &["b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh", "tr"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// Generator settings. Counts of token pools are per type (signal, context)
/// or per event (event tokens).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub event_types: Vec<String>,
    pub events_per_type: usize,
    pub tweets_per_event: usize,
    /// Signal words shared by every type.
    pub signal_tokens: usize,
    /// Signal words owned by each type; they appear as noise in other types.
    pub type_signal_tokens: usize,
    pub filler_tokens: usize,
    /// Context words per type; every tweet carries one.
    pub context_tokens: usize,
    /// Place names per event.
    pub event_tokens: usize,
    /// Probability that a tweet of a biased event carries a place name exactly
    /// when it is critical. Otherwise a place name appears with probability
    /// `event_token_rate` regardless of the label.
    pub bias: f64,
    /// How many biased events of each type (the last ones) tie their place
    /// names to the non-critical label instead, so the direction of the
    /// shortcut depends on the event.
    pub inverted_events: usize,
    pub event_token_rate: f64,
    pub critical_rate: f64,
    /// Probability that a non-critical tweet carries a signal word anyway.
    pub signal_noise: f64,
    /// Probability that a non-critical tweet carries another type's signal word.
    pub cross_signal_rate: f64,
    /// Index, within each type, of the event whose place names are unbiased.
    pub unbiased_event: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub embedding_dim: usize,
    /// Share of variance of every place-name vector that comes from one common
    /// direction, so unseen place names resemble seen ones as in real word
    /// vectors. Zero gives independent vectors.
    pub place_similarity: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            event_types: vec!["synthetic".into()],
            events_per_type: 5,
            tweets_per_event: 600,
            signal_tokens: 12,
            type_signal_tokens: 0,
            filler_tokens: 60,
            context_tokens: 3,
            event_tokens: 4,
            bias: 0.9,
            inverted_events: 0,
            event_token_rate: 0.5,
            critical_rate: 0.25,
            signal_noise: 0.2,
            cross_signal_rate: 0.0,
            unbiased_event: 0,
            min_tokens: 6,
            max_tokens: 12,
            embedding_dim: 32,
            place_similarity: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        for (name, p) in [
            ("bias", self.bias),
            ("event_token_rate", self.event_token_rate),
            ("signal_noise", self.signal_noise),
            ("cross_signal_rate", self.cross_signal_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.critical_rate > 0.0 && self.critical_rate < 1.0) {
            return fail(format!("critical_rate must lie in (0, 1), got {}", self.critical_rate));
        }
        if self.event_types.is_empty() {
            return fail("no event types".into());
        }
        let distinct: HashSet<&String> = self.event_types.iter().collect();
        if distinct.len() != self.event_types.len() {
            return fail("duplicate event type".into());
        }
        if let Some(t) = self
            .event_types
            .iter()
            .find(|t| t.is_empty() || !t.chars().all(|c| c.is_ascii_lowercase()))
        {
            return fail(format!("event type {t:?} must be lowercase letters"));
        }
        if self.events_per_type * self.event_types.len() < 3 {
            return fail("at least 3 events are required".into());
        }
        if self.unbiased_event >= self.events_per_type {
            return fail(format!(
                "unbiased event index {} out of range for {} events per type",
                self.unbiased_event, self.events_per_type
            ));
        }
        if self.tweets_per_event == 0 {
            return fail("tweets_per_event must be positive".into());
        }
        if self.signal_tokens + self.type_signal_tokens == 0 {
            return fail("empty signal vocabulary".into());
        }
        if self.filler_tokens == 0 {
            return fail("empty filler vocabulary".into());
        }
        if self.event_tokens == 0 {
            return fail("empty event-token vocabulary".into());
        }
        if self.cross_signal_rate > 0.0 && (self.type_signal_tokens == 0 || self.event_types.len() < 2) {
            return fail("cross-type signal noise needs several types with their own signal words".into());
        }
        // context + two signal words + place name + cross-type noise word
        let required = 5;
        if self.min_tokens < required || self.min_tokens > self.max_tokens {
            return fail(format!(
                "token range {}..={} must satisfy {required} <= min <= max",
                self.min_tokens, self.max_tokens
            ));
        }
        if self.embedding_dim == 0 {
            return fail("embedding_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.place_similarity) {
            return fail(format!("place_similarity must lie in [0, 1), got {}", self.place_similarity));
        }
        let biased = self.events_per_type - 1;
        if self.inverted_events > biased {
            return fail(format!(
                "{} inverted events requested but each type has only {biased} biased events",
                self.inverted_events
            ));
        }
        Ok(())
    }

    pub fn event_id(&self, event_type: &str, index: usize) -> String {
        format!("{event_type}{:02}", index + 1)
    }

    /// The unbiased event of every type.
    pub fn unbiased_events(&self) -> Vec<String> {
        self.event_types
            .iter()
            .map(|t| self.event_id(t, self.unbiased_event))
            .collect()
    }
}

/// Token pools chosen by the generator, for analysis of trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub spec: SynthSpec,
    pub signal_tokens: Vec<String>,
    pub type_signal_tokens: BTreeMap<String, Vec<String>>,
    pub context_tokens: BTreeMap<String, Vec<String>>,
    pub filler_tokens: Vec<String>,
    pub event_tokens: BTreeMap<String, Vec<String>>,
    pub unbiased_events: Vec<String>,
}

impl SynthMetadata {
    /// True for any place name of any event.
    pub fn is_event_token(&self, token: &str) -> bool {
        self.event_tokens.values().any(|ts| ts.iter().any(|t| t == token))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub tweets: Vec<RawTweet>,
    /// One vector per token of every pool, in a fixed order.
    pub embeddings: Vec<(String, Vec<f64>)>,
    pub metadata: SynthMetadata,
}

impl SynthCorpus {
    /// Sorted vocabulary of the corpus, usable as a segmentation wordlist.
    pub fn wordlist(&self) -> Vec<String> {
        let mut w: Vec<String> = self.embeddings.iter().map(|(t, _)| t.clone()).collect();
        w.sort();
        w
    }

    /// GloVe text format: token followed by its components.
    pub fn write_embeddings<W: Write>(&self, mut w: W) -> Result<()> {
        for (tok, v) in &self.embeddings {
            write!(w, "{tok}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_wordlist<W: Write>(&self, mut w: W) -> Result<()> {
        for t in self.wordlist() {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }
}

/// Draws `n` fresh pronounceable pseudo-words not in `taken`.
fn pseudo_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("non-empty"));
            w.push_str(VOWELS.choose(rng).expect("non-empty"));
        }
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Takes `n` words from `list` starting at `*cursor`, then pseudo-words.
fn take_words(
    list: &[&str],
    cursor: &mut usize,
    n: usize,
    rng: &mut ChaCha8Rng,
    taken: &mut HashSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n && *cursor < list.len() {
        let w = list[*cursor].to_string();
        *cursor += 1;
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    let rest = n - out.len();
    out.extend(pseudo_words(rng, rest, taken));
    out
}

/// Generates a corpus; identical specs give identical corpora.
pub fn gen_synth(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken: HashSet<String> = HashSet::new();
    taken.insert("rt".into());
    for t in &spec.event_types {
        taken.insert(t.clone());
    }

    let mut signal_cursor = 0;
    let signal = take_words(SIGNAL_WORDS, &mut signal_cursor, spec.signal_tokens, &mut rng, &mut taken);
    let mut type_signal = BTreeMap::new();
    for t in &spec.event_types {
        let words = take_words(SIGNAL_WORDS, &mut signal_cursor, spec.type_signal_tokens, &mut rng, &mut taken);
        type_signal.insert(t.clone(), words);
    }
    let filler = take_words(FILLER_WORDS, &mut 0, spec.filler_tokens, &mut rng, &mut taken);
    let mut context = BTreeMap::new();
    for t in &spec.event_types {
        context.insert(t.clone(), pseudo_words(&mut rng, spec.context_tokens, &mut taken));
    }
    let mut places = BTreeMap::new();
    for t in &spec.event_types {
        for e in 0..spec.events_per_type {
            places.insert(spec.event_id(t, e), pseudo_words(&mut rng, spec.event_tokens, &mut taken));
        }
    }

    let normal = Normal::new(0.0, 1.0 / (spec.embedding_dim as f64).sqrt()).expect("valid std");
    let mut embeddings = Vec::new();
    let words = signal
        .iter()
        .chain(type_signal.values().flatten())
        .chain(&filler)
        .chain(context.values().flatten());
    for tok in words {
        let v = (0..spec.embedding_dim).map(|_| normal.sample(&mut rng)).collect();
        embeddings.push((tok.clone(), v));
    }
    let common: Vec<f64> = (0..spec.embedding_dim).map(|_| normal.sample(&mut rng)).collect();
    let (a, b) = (spec.place_similarity.sqrt(), (1.0 - spec.place_similarity).sqrt());
    for tok in places.values().flatten() {
        let v = common.iter().map(|c| a * c + b * normal.sample(&mut rng)).collect();
        embeddings.push((tok.clone(), v));
    }

    let mut tweets = Vec::with_capacity(spec.event_types.len() * spec.events_per_type * spec.tweets_per_event);
    for t in &spec.event_types {
        let mut crit_words: Vec<&String> = signal.iter().collect();
        crit_words.extend(&type_signal[t]);
        let foreign: Vec<&String> = type_signal
            .iter()
            .filter(|(other, _)| *other != t)
            .flat_map(|(_, w)| w)
            .collect();
        let mut biased_rank = 0;
        for e in 0..spec.events_per_type {
            let event_id = spec.event_id(t, e);
            let biased = e != spec.unbiased_event;
            let inverted = biased && biased_rank >= spec.events_per_type - 1 - spec.inverted_events;
            biased_rank += usize::from(biased);
            for k in 0..spec.tweets_per_event {
                let critical = rng.random_bool(spec.critical_rate);
                let len = rng.random_range(spec.min_tokens..=spec.max_tokens);
                let mut toks: Vec<String> = Vec::with_capacity(len);
                if !context[t].is_empty() {
                    toks.push(context[t].choose(&mut rng).expect("non-empty").to_string());
                }
                if critical {
                    let n = if rng.random_bool(0.5) { 2 } else { 1 };
                    for _ in 0..n {
                        toks.push(crit_words.choose(&mut rng).expect("non-empty").to_string());
                    }
                } else {
                    if rng.random_bool(spec.signal_noise) {
                        toks.push(crit_words.choose(&mut rng).expect("non-empty").to_string());
                    }
                    if !foreign.is_empty() && rng.random_bool(spec.cross_signal_rate) {
                        toks.push(foreign.choose(&mut rng).expect("non-empty").to_string());
                    }
                }
                let place = if biased && rng.random_bool(spec.bias) {
                    critical != inverted
                } else {
                    rng.random_bool(spec.event_token_rate)
                };
                if place {
                    toks.push(places[&event_id].choose(&mut rng).expect("non-empty").to_string());
                }
                while toks.len() < len {
                    toks.push(filler.choose(&mut rng).expect("non-empty").to_string());
                }
                toks.shuffle(&mut rng);

                let mut text = toks.join(" ");
                if rng.random_bool(0.1) {
                    text = format!("RT @user{}: {text}", rng.random_range(0..1000));
                }
                if rng.random_bool(0.2) {
                    text.push_str(&format!(" https://t.co/{:08x}", rng.random::<u32>()));
                }
                if rng.random_bool(0.1) {
                    text.push_str(&format!(" #{t}"));
                }
                let label = match (critical, rng.random_bool(0.5)) {
                    (true, true) => "critical",
                    (true, false) => "high",
                    (false, true) => "medium",
                    (false, false) => "low",
                };
                tweets.push(RawTweet {
                    id: format!("{event_id}-{k:05}"),
                    text,
                    event_id: event_id.clone(),
                    event_type: t.clone(),
                    label: label.to_string(),
                });
            }
        }
    }

    Ok(SynthCorpus {
        tweets,
        embeddings,
        metadata: SynthMetadata {
            spec: spec.clone(),
            signal_tokens: signal,
            type_signal_tokens: type_signal,
            context_tokens: context,
            filler_tokens: filler,
            event_tokens: places,
            unbiased_events: spec.unbiased_events(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{collapse_label, Label4};

    fn small() -> SynthSpec {
        SynthSpec {
            tweets_per_event: 200,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn reproducible() {
        let a = gen_synth(&small()).unwrap();
        let b = gen_synth(&small()).unwrap();
        assert_eq!(a, b);
        let c = gen_synth(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.tweets, c.tweets);
    }

    #[test]
    fn event_tokens_are_disjoint() {
        let spec = SynthSpec {
            event_types: vec!["flood".into(), "typhoon".into()],
            type_signal_tokens: 3,
            ..small()
        };
        let c = gen_synth(&spec).unwrap();
        let mut seen = HashSet::new();
        for toks in c.metadata.event_tokens.values() {
            for t in toks {
                assert!(seen.insert(t.clone()), "{t} shared");
            }
        }
        assert_eq!(c.metadata.event_tokens.len(), 10);
        let all: HashSet<&String> = c.embeddings.iter().map(|(t, _)| t).collect();
        assert_eq!(all.len(), c.embeddings.len());
    }

    #[test]
    fn class_skew_and_lengths() {
        let c = gen_synth(&small()).unwrap();
        let crit = c
            .tweets
            .iter()
            .filter(|t| collapse_label(t.label.parse::<Label4>().unwrap()) == 1)
            .count();
        let rate = crit as f64 / c.tweets.len() as f64;
        assert!((rate - 0.25).abs() < 0.03, "{rate}");
        assert_eq!(c.tweets.len(), 1000);
    }

    #[test]
    fn bias_only_in_biased_events() {
        let c = gen_synth(&SynthSpec { bias: 1.0, inverted_events: 0, ..small() }).unwrap();
        let mut mismatched = BTreeMap::<String, usize>::new();
        for t in &c.tweets {
            let crit = collapse_label(t.label.parse::<Label4>().unwrap()) == 1;
            if crit != has_place(&c, t) {
                *mismatched.entry(t.event_id.clone()).or_default() += 1;
            }
        }
        assert_eq!(mismatched.keys().collect::<Vec<_>>(), vec!["synthetic01"]);
        assert!(mismatched["synthetic01"] > 50);
    }

    fn has_place(c: &SynthCorpus, t: &RawTweet) -> bool {
        let places = &c.metadata.event_tokens[&t.event_id];
        t.text.split_whitespace().any(|w| places.iter().any(|p| p == w))
    }

    #[test]
    fn inverted_events_tie_places_to_the_other_label() {
        let c = gen_synth(&SynthSpec { bias: 1.0, inverted_events: 2, ..small() }).unwrap();
        let mut agree = BTreeMap::<String, (usize, usize)>::new();
        for t in &c.tweets {
            let crit = collapse_label(t.label.parse::<Label4>().unwrap()) == 1;
            let e = agree.entry(t.event_id.clone()).or_default();
            e.0 += usize::from(crit == has_place(&c, t));
            e.1 += 1;
        }
        let share = |id: &str| agree[id].0 as f64 / agree[id].1 as f64;
        assert!(share("synthetic02") == 1.0 && share("synthetic03") == 1.0);
        assert!(share("synthetic04") == 0.0 && share("synthetic05") == 0.0);
        assert!((0.2..0.8).contains(&share("synthetic01")));
    }

    #[test]
    fn place_vectors_share_a_direction() {
        let mean_cos = |c: &SynthCorpus, pred: &dyn Fn(&str) -> bool| {
            let vs: Vec<&Vec<f64>> = c.embeddings.iter().filter(|(t, _)| pred(t)).map(|(_, v)| v).collect();
            let cos = |a: &[f64], b: &[f64]| {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                dot / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|x| x * x).sum::<f64>()).sqrt()
            };
            let (mut sum, mut n) = (0.0, 0);
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    sum += cos(vs[i], vs[j]);
                    n += 1;
                }
            }
            sum / n as f64
        };
        let spec = SynthSpec { embedding_dim: 64, place_similarity: 0.5, ..small() };
        let c = gen_synth(&spec).unwrap();
        let places = mean_cos(&c, &|t| c.metadata.is_event_token(t));
        let fillers = mean_cos(&c, &|t| c.metadata.filler_tokens.iter().any(|f| f == t));
        assert!((places - 0.5).abs() < 0.15, "{places}");
        assert!(fillers.abs() < 0.05, "{fillers}");
        let plain = gen_synth(&SynthSpec { place_similarity: 0.0, ..spec }).unwrap();
        assert!(mean_cos(&plain, &|t| plain.metadata.is_event_token(t)).abs() < 0.1);
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_synth(&SynthSpec { place_similarity: 1.0, ..small() }).is_err());
        assert!(gen_synth(&SynthSpec { inverted_events: 5, ..small() }).is_err());
        assert!(matches!(gen_synth(&SynthSpec { bias: 1.5, ..small() }), Err(Error::Spec(_))));
        assert!(gen_synth(&SynthSpec { filler_tokens: 0, ..small() }).is_err());
        assert!(gen_synth(&SynthSpec { events_per_type: 2, ..small() }).is_err());
        assert!(gen_synth(&SynthSpec { unbiased_event: 5, ..small() }).is_err());
        assert!(gen_synth(&SynthSpec { min_tokens: 3, ..small() }).is_err());
    }

    #[test]
    fn embeddings_file_round_trips_tokens() {
        let c = gen_synth(&small()).unwrap();
        let mut buf = Vec::new();
        c.write_embeddings(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), c.embeddings.len());
        let first = text.lines().next().unwrap();
        assert_eq!(first.split(' ').count(), 33);
        let v: f64 = first.split(' ').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, c.embeddings[0].1[0]);
    }
}
