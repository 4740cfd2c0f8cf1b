//! Acceptance checks. Runs every criterion in order and prints one PASS or
//! FAIL line each; exits non-zero if any fails. A name filter may be passed as
//! the first free argument, e.g. `cargo test --test acceptance -- saliency`.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use debias_core::autograd::{Graph, Var};
use debias_core::data::synth::{gen_synth, SynthCorpus, SynthSpec};
use debias_core::data::{to_examples, EventScope, CRITICAL};
use debias_core::eval::{auc, f1_scores, saliency};
use debias_core::experiment::{loo_splits, preprocess_records, run_split, ExperimentConfig};
use debias_core::gradcheck::{grad_check, grad_errors};
use debias_core::nn::{embedding_tokens, BoundLstm, EmbeddingTable, GradientReversal, LinearHead, Lstm};
use debias_core::text::{build_vocab, clean, preprocess, segment, Vocab, Wordlist};
use debias_core::train::{train, Trainer};
use debias_core::{Architecture, Batch, Classifier, LabeledExample, ModelConfig, Tensor, TrainConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-scale..scale)).collect()).unwrap()
}

fn toy_embedding(r: &mut ChaCha8Rng, words: &[&str], dim: usize) -> EmbeddingTable {
    let vocab = Vocab::from_corpus(&[words.to_vec()]).unwrap();
    let m = random_tensor(r, &[vocab.len(), dim], 0.5);
    EmbeddingTable::new(vocab, m, false).unwrap()
}

// ---------------------------------------------------------------- criterion 1

const GRAD_TOL: f64 = 1e-5;
const EPS: f64 = 1e-5;

/// Central-difference derivative of `f` at `x`, coordinate by coordinate.
fn numeric_grad<F: Fn(&mut Graph, Var) -> Var>(f: &F, x: &Tensor) -> Vec<f64> {
    let value = |p: &Tensor| {
        let mut g = Graph::new();
        let v = g.param(p.clone());
        let out = f(&mut g, v);
        g.value(out).data()[0]
    };
    let mut probe = x.clone();
    (0..x.numel())
        .map(|i| {
            let o = probe.data()[i];
            probe.data_mut()[i] = o + EPS;
            let plus = value(&probe);
            probe.data_mut()[i] = o - EPS;
            let minus = value(&probe);
            probe.data_mut()[i] = o;
            (plus - minus) / (2.0 * EPS)
        })
        .collect()
}

fn gradient_correctness() -> Outcome {
    let mut r = rng(1);
    let (d, h, t, b) = (4, 3, 5, 2);
    let lstm = Lstm::new(d, h, 2, &mut r);
    let head = LinearHead::new(2 * h, 2, &mut r);
    let inputs: Vec<Tensor> = (0..t).map(|_| random_tensor(&mut r, &[b, d], 1.0)).collect();
    let lengths = [t, t - 2];
    let targets = [1usize, 0];
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let mut record = |name: String, err: f64| {
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max(err);
    };

    // Loss of the full encoder + head with the given first-layer weights.
    let loss_with = |g: &mut Graph, layer0: (Var, Var, Var), xs: &[Var]| -> debias_core::Result<Var> {
        let l1 = &lstm.layers()[1];
        let second = (g.param(l1.w.clone()), g.param(l1.u.clone()), g.param(l1.b.clone()));
        let enc = BoundLstm::from_vars(g, vec![layer0, second])?;
        let code = enc.encode_batch(g, xs, &lengths)?;
        let logits = head.bind(g).apply(g, code)?;
        g.softmax_cross_entropy(logits, &targets)
    };
    let l0 = &lstm.layers()[0];
    let const_inputs = |g: &mut Graph| -> Vec<Var> { inputs.iter().map(|x| g.constant(x.clone())).collect() };

    // Embedding-frozen path: gradient reaches the looked-up input vectors.
    for step in 0..t {
        let f = |g: &mut Graph, x: Var| {
            let mut xs = const_inputs(g);
            xs[step] = x;
            let layer0 = (g.param(l0.w.clone()), g.param(l0.u.clone()), g.param(l0.b.clone()));
            loss_with(g, layer0, &xs)
        };
        record("embedding inputs".into(), grad_check(f, &inputs[step], EPS).map_err(|e| e.to_string())?);
    }

    // Each gate block of W, U and b in both layers.
    for (li, layer) in lstm.layers().iter().enumerate() {
        for (pi, pname) in ["W", "U", "b"].iter().enumerate() {
            let target = [&layer.w, &layer.u, &layer.b][pi];
            let f = |g: &mut Graph, x: Var| {
                let xs = const_inputs(g);
                let mut bound: Vec<(Var, Var, Var)> = lstm
                    .layers()
                    .iter()
                    .map(|l| (g.param(l.w.clone()), g.param(l.u.clone()), g.param(l.b.clone())))
                    .collect();
                match pi {
                    0 => bound[li].0 = x,
                    1 => bound[li].1 = x,
                    _ => bound[li].2 = x,
                }
                let enc = BoundLstm::from_vars(g, bound)?;
                let code = enc.encode_batch(g, &xs, &lengths)?;
                let logits = head.bind(g).apply(g, code)?;
                g.softmax_cross_entropy(logits, &targets)
            };
            let errs = grad_errors(f, target, EPS).map_err(|e| e.to_string())?;
            let per_row = if pi == 2 { 1 } else { target.cols() };
            for (gi, gate) in ["input", "forget", "cell", "output"].iter().enumerate() {
                let block = &errs[gi * h * per_row..(gi + 1) * h * per_row];
                record(format!("lstm {gate} gate"), block.iter().cloned().fold(0.0, f64::max));
            }
            record(format!("lstm layer {li} {pname}"), errs.iter().cloned().fold(0.0, f64::max));
        }
    }

    // Trainable embedding table, through the gather.
    let mut er = rng(2);
    let table = random_tensor(&mut er, &[6, d], 0.5);
    let ids: Vec<Vec<usize>> = vec![vec![2, 3, 4, 5, 1], vec![5, 2, 2, 0, 0]];
    let f = |g: &mut Graph, tab: Var| {
        let xs = (0..t)
            .map(|s| g.gather_rows(tab, &[ids[0][s], ids[1][s]]))
            .collect::<debias_core::Result<Vec<_>>>()?;
        let layer0 = (g.param(l0.w.clone()), g.param(l0.u.clone()), g.param(l0.b.clone()));
        loss_with(g, layer0, &xs)
    };
    record("embedding table".into(), grad_check(f, &table, EPS).map_err(|e| e.to_string())?);

    // Linear heads and cross-entropy.
    let x = random_tensor(&mut r, &[3, 2 * h], 1.0);
    let wide = LinearHead::new(2 * h, 4, &mut r);
    let head_f = |which: usize| {
        let (x, wide) = (&x, &wide);
        move |g: &mut Graph, v: Var| {
            let xv = g.constant(x.clone());
            let wv = g.param(wide.weights.clone());
            let bv = g.param(wide.bias.clone());
            let logits = match which {
                0 => g.linear(xv, v, Some(bv))?,
                1 => g.linear(xv, wv, Some(v))?,
                _ => g.linear(v, wv, Some(bv))?,
            };
            g.softmax_cross_entropy(logits, &[3, 0, 1])
        }
    };
    record("head weights".into(), grad_check(head_f(0), &wide.weights, EPS).map_err(|e| e.to_string())?);
    record("head bias".into(), grad_check(head_f(1), &wide.bias, EPS).map_err(|e| e.to_string())?);
    record("head input".into(), grad_check(head_f(2), &x, EPS).map_err(|e| e.to_string())?);
    let logits = random_tensor(&mut r, &[4, 3], 3.0);
    let ce = |g: &mut Graph, v: Var| g.softmax_cross_entropy(v, &[0, 2, 1, 2]);
    record("cross entropy".into(), grad_check(ce, &logits, EPS).map_err(|e| e.to_string())?);

    // Gradient reversal: analytic gradient must equal -lambda times the
    // finite-difference derivative of the (identity) forward function.
    let code = random_tensor(&mut r, &[2, 2 * h], 1.0);
    let ev_head = LinearHead::new(2 * h, 3, &mut r);
    for lambda in [0.5, 1.0, 2.0] {
        let grl = GradientReversal::new(lambda).unwrap();
        let f = |g: &mut Graph, v: Var| {
            let rev = grl.apply(g, v);
            let logits = ev_head.bind(g).apply(g, rev).unwrap();
            g.softmax_cross_entropy(logits, &[2, 0]).unwrap()
        };
        let numeric = numeric_grad(&f, &code);
        let mut g = Graph::new();
        let v = g.param(code.clone());
        let out = f(&mut g, v);
        g.backward(out).unwrap();
        let analytic = g.grad(v);
        let err = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(a, n)| {
                let expected = -lambda * n;
                (a - expected).abs() / a.abs().max(expected.abs()).max(1e-8)
            })
            .fold(0.0, f64::max);
        record(format!("grl lambda={lambda}"), err);
    }

    let max = worst.values().cloned().fold(0.0, f64::max);
    let failing: Vec<String> = worst
        .iter()
        .filter(|(_, &e)| !(e < GRAD_TOL))
        .map(|(k, e)| format!("{k}: {e:.2e}"))
        .collect();
    ensure(failing.is_empty(), || format!("relative error >= {GRAD_TOL:e}: {}", failing.join(", ")))?;
    Ok(format!("{} paths, max relative error {max:.2e}", worst.len()))
}

// ---------------------------------------------------------------- criterion 2

fn toy_batch(r: &mut ChaCha8Rng, vocab_len: usize, rows: usize, events: usize) -> Batch {
    let ids = (0..rows)
        .map(|_| {
            let len = r.random_range(1..7);
            (0..len).map(|_| r.random_range(2..vocab_len)).collect()
        })
        .collect();
    let crit = (0..rows).map(|_| r.random_range(0..2)).collect();
    let ev = (0..rows).map(|_| r.random_range(0..events)).collect();
    Batch::new(ids, crit, Some(ev)).unwrap()
}

const TOY_WORDS: [&str; 10] = ["water", "help", "bridge", "flood", "rain", "road", "sos", "trapped", "news", "photo"];

fn small_config(lambda: f64) -> ModelConfig {
    ModelConfig {
        hidden: 6,
        layers: 2,
        lambda,
        train_embeddings: false,
    }
}

fn grl_algebra() -> Outcome {
    let mut r = rng(7);
    let mut checked = 0;
    for i in 0..1000 {
        let rows = r.random_range(1..6);
        let cols = r.random_range(1..9);
        let scale = [1e-300, 1e-3, 1.0, 1e6, 1e100][i % 5];
        let x = random_tensor(&mut r, &[rows, cols], scale);
        let up = random_tensor(&mut r, &[rows, cols], 10.0);
        for lambda in [0.5, 1.0, 2.0] {
            let mut g = Graph::new();
            let xv = g.param(x.clone());
            let y = GradientReversal::new(lambda).unwrap().apply(&mut g, xv);
            ensure(g.value(y).bitwise_eq(&x), || format!("forward changed tensor {i}"))?;
            let c = g.constant(up.clone());
            let prod = g.mul(y, c).unwrap();
            let s = g.sum(prod);
            g.backward(s).unwrap();
            let grad = g.grad(xv);
            let expected = up.map(|u| -lambda * u);
            ensure(grad.bitwise_eq(&expected), || format!("backward differs from -lambda*g on tensor {i}"))?;
            checked += 1;
        }
    }

    // lambda = 0: encoder gradients equal the baseline's on the same batch and init.
    let mut r = rng(8);
    let emb = toy_embedding(&mut r, &TOY_WORDS, 5);
    let batch = toy_batch(&mut r, emb.vocab().len(), 8, 3);
    let base = Classifier::new(Architecture::Baseline, emb.clone(), 3, &small_config(0.0), 11).unwrap();
    let adv = Classifier::new(Architecture::Adversarial, emb, 3, &small_config(0.0), 11).unwrap();
    let (gb, _) = Trainer::new(base.clone(), 0.01, None).gradients(&batch).unwrap();
    let (ga, _) = Trainer::new(adv, 0.01, None).gradients(&batch).unwrap();
    let trunk = base.trunk_len();
    let same = gb.iter().zip(&ga[..trunk]).all(|(a, b)| a.bitwise_eq(b));
    ensure(same, || "lambda=0 encoder gradients differ from baseline".into())?;
    Ok(format!("{checked} forward/backward checks, lambda=0 trunk gradients bitwise equal"))
}

// ---------------------------------------------------------------- criterion 3

fn architecture_equivalences() -> Outcome {
    let mut r = rng(21);
    let emb = toy_embedding(&mut r, &TOY_WORDS, 5);
    let batches: Vec<Batch> = (0..10).map(|_| toy_batch(&mut r, emb.vocab().len(), 6, 3)).collect();
    let multi = Classifier::new(Architecture::Multitask, emb.clone(), 3, &small_config(1.0), 5).unwrap();
    let mut adv = Classifier::new(Architecture::Adversarial, emb, 3, &small_config(1.0), 5).unwrap();

    for b in &batches {
        let loss = |m: &Classifier| {
            let mut g = Graph::new();
            let fp = m.forward(&mut g, b).unwrap();
            g.value(fp.loss).data()[0]
        };
        let (lm, la) = (loss(&multi), loss(&adv));
        ensure(lm.to_bits() == la.to_bits(), || format!("forward losses differ: {lm} vs {la}"))?;
    }

    adv.set_reversal(GradientReversal::unchecked(-1.0));
    let mut tm = Trainer::new(multi, 0.01, Some(5.0));
    let mut ta = Trainer::new(adv, 0.01, Some(5.0));
    for (i, b) in batches.iter().enumerate() {
        tm.step(b).unwrap();
        ta.step(b).unwrap();
        let same = tm
            .model()
            .tensors()
            .iter()
            .zip(ta.model().tensors())
            .all(|(x, y)| x.bitwise_eq(y));
        ensure(same, || format!("parameters diverge after step {}", i + 1))?;
    }
    Ok("forward losses equal on 10 batches; lambda=-1 matches multitask bitwise over 10 steps".into())
}

// ---------------------------------------------------------- criteria 4, 5, 6

/// Model size used by the synthetic experiments (the full-size model is
/// impractical on one CPU core within the runtime target).
fn synth_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.model.hidden = 32;
    cfg
}

const SEEDS: u64 = 5;

/// 5 events of 600 posts, bias 0.9, first event unbiased.
fn bias_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        event_types: vec!["flood".into()],
        events_per_type: 5,
        tweets_per_event: 600,
        bias: 0.9,
        unbiased_event: 0,
        seed,
        ..SynthSpec::default()
    }
}

fn mixed_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        event_types: vec!["flood".into(), "typhoon".into()],
        events_per_type: 3,
        ..bias_spec(seed)
    }
}

struct ArmResult {
    critical_f1: f64,
    /// Mean per-tweet share of saliency on place names, over held-out posts
    /// that contain one.
    place_mass: f64,
}

struct SeedResult {
    baseline: ArmResult,
    adversarial: ArmResult,
}

impl SeedResult {
    fn advantage(&self) -> f64 {
        self.adversarial.critical_f1 - self.baseline.critical_f1
    }
}

fn prepare_corpus(corpus: &SynthCorpus, seed: u64) -> (EmbeddingTable, Vec<LabeledExample>) {
    let words = Wordlist::new(corpus.wordlist()).unwrap();
    let clean = preprocess_records(&corpus.tweets, &words).unwrap();
    let mut emb = Vec::new();
    corpus.write_embeddings(&mut emb).unwrap();
    let tokens: Vec<Vec<String>> = clean.iter().map(|t| t.tokens.clone()).collect();
    let vocab = build_vocab(&tokens, &embedding_tokens(emb.as_slice()).unwrap()).unwrap();
    let table = EmbeddingTable::from_glove(vocab.clone(), emb.as_slice(), seed).unwrap();
    (table, to_examples(&clean, &vocab).unwrap())
}

/// Trains baseline and adversarial models on every event but the first
/// (unbiased) event of the first type, and scores both on that event.
fn bias_experiment(spec: &SynthSpec) -> SeedResult {
    let corpus = gen_synth(spec).unwrap();
    let (table, examples) = prepare_corpus(&corpus, spec.seed);
    let scope = EventScope::parse(&spec.event_types.join("+")).unwrap();
    let held_out = spec.event_id(&spec.event_types[0], spec.unbiased_event);
    let split = loo_splits(Architecture::Adversarial, &examples, &scope)
        .unwrap()
        .into_iter()
        .find(|s| s.held_out_event == held_out)
        .unwrap();
    let vocab = table.vocab().clone();
    let meta = &corpus.metadata;
    let arm = |arch| {
        let run = run_split(arch, &table, &split, &synth_config(), spec.seed).unwrap();
        let masses: Vec<f64> = split
            .test
            .iter()
            .filter(|e| e.token_ids.iter().any(|&t| meta.is_event_token(vocab.token(t))))
            .filter_map(|e| saliency(&run.model, e).unwrap().mass_fraction(|t| meta.is_event_token(t)))
            .collect();
        ArmResult {
            critical_f1: run.metrics.critical_f1,
            place_mass: masses.iter().sum::<f64>() / masses.len() as f64,
        }
    };
    SeedResult {
        baseline: arm(Architecture::Baseline),
        adversarial: arm(Architecture::Adversarial),
    }
}

fn run_seeds(spec: fn(u64) -> SynthSpec, label: &str) -> Vec<SeedResult> {
    (0..SEEDS)
        .map(|s| {
            let r = bias_experiment(&spec(s));
            eprintln!(
                "  {label} seed {s}: critical F1 baseline {:.4} adversarial {:.4} ({:+.4}); place saliency {:.4} vs {:.4}",
                r.baseline.critical_f1,
                r.adversarial.critical_f1,
                r.advantage(),
                r.baseline.place_mass,
                r.adversarial.place_mass
            );
            r
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

struct Synthetic {
    single: Option<Vec<SeedResult>>,
}

impl Synthetic {
    fn single(&mut self) -> &[SeedResult] {
        self.single.get_or_insert_with(|| run_seeds(bias_spec, "single type"))
    }
}

fn bias_removal(s: &mut Synthetic) -> Outcome {
    let res = s.single();
    let adv = mean(res.iter().map(SeedResult::advantage));
    let wins = res.iter().filter(|r| r.advantage() > 0.0).count();
    let detail = format!(
        "mean critical F1 baseline {:.4}, adversarial {:.4}, advantage {adv:+.4}, adversarial ahead in {wins}/{}",
        mean(res.iter().map(|r| r.baseline.critical_f1)),
        mean(res.iter().map(|r| r.adversarial.critical_f1)),
        res.len()
    );
    ensure(adv >= 0.03 && wins * 5 >= 4 * res.len(), || detail.clone())?;
    Ok(detail)
}

fn entanglement(s: &mut Synthetic) -> Outcome {
    let single = mean(s.single().iter().map(SeedResult::advantage));
    let mixed = run_seeds(mixed_spec, "mixed types");
    let adv = mean(mixed.iter().map(SeedResult::advantage));
    let detail = format!("adversarial advantage single type {single:+.4}, mixed types {adv:+.4}");
    ensure(adv < 0.03, || detail.clone())?;
    Ok(detail)
}

fn saliency_direction(s: &mut Synthetic) -> Outcome {
    let res = s.single();
    let lower = res.iter().filter(|r| r.adversarial.place_mass < r.baseline.place_mass).count();
    let detail = format!(
        "mean place-name saliency share baseline {:.4}, adversarial {:.4}; adversarial lower in {lower}/{}",
        mean(res.iter().map(|r| r.baseline.place_mass)),
        mean(res.iter().map(|r| r.adversarial.place_mass)),
        res.len()
    );
    ensure(lower * 5 >= 4 * res.len(), || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- criterion 7

/// (tp, fp, fn, tn) for the critical class, with hand-computed critical,
/// non-critical and macro F1.
const TABLES: [((usize, usize, usize, usize), f64, f64, f64); 20] = [
    ((5, 0, 0, 5), 1.0, 1.0, 1.0),
    ((0, 0, 0, 10), 0.0, 1.0, 0.5),
    ((0, 5, 5, 0), 0.0, 0.0, 0.0),
    ((2, 1, 1, 6), 2.0 / 3.0, 6.0 / 7.0, 16.0 / 21.0),
    ((1, 1, 1, 1), 0.5, 0.5, 0.5),
    ((3, 0, 3, 4), 2.0 / 3.0, 8.0 / 11.0, 23.0 / 33.0),
    ((4, 4, 0, 2), 2.0 / 3.0, 0.5, 7.0 / 12.0),
    ((0, 3, 0, 7), 0.0, 14.0 / 17.0, 7.0 / 17.0),
    ((0, 0, 4, 6), 0.0, 0.75, 0.375),
    ((10, 2, 3, 85), 0.8, 170.0 / 175.0, 0.8 / 2.0 + 85.0 / 175.0),
    ((1, 0, 9, 90), 2.0 / 11.0, 180.0 / 189.0, 1.0 / 11.0 + 90.0 / 189.0),
    ((9, 9, 1, 1), 18.0 / 28.0, 2.0 / 12.0, 9.0 / 28.0 + 1.0 / 12.0),
    ((7, 3, 2, 8), 14.0 / 19.0, 16.0 / 21.0, 7.0 / 19.0 + 8.0 / 21.0),
    ((25, 5, 5, 65), 50.0 / 60.0, 130.0 / 140.0, 25.0 / 60.0 + 65.0 / 140.0),
    ((1, 2, 3, 4), 2.0 / 7.0, 8.0 / 13.0, 1.0 / 7.0 + 4.0 / 13.0),
    ((6, 1, 0, 0), 12.0 / 13.0, 0.0, 6.0 / 13.0),
    ((0, 0, 0, 1), 0.0, 1.0, 0.5),
    ((1, 0, 0, 0), 1.0, 0.0, 0.5),
    ((13, 7, 11, 69), 26.0 / 44.0, 138.0 / 156.0, 13.0 / 44.0 + 69.0 / 156.0),
    ((50, 25, 25, 0), 100.0 / 150.0, 0.0, 50.0 / 150.0),
];

fn table_vectors((tp, fp, fn_, tn): (usize, usize, usize, usize)) -> (Vec<usize>, Vec<usize>) {
    let mut p = Vec::new();
    let mut y = Vec::new();
    for (n, pred, label) in [(tp, 1, 1), (fp, 1, 0), (fn_, 0, 1), (tn, 0, 0)] {
        p.extend(std::iter::repeat_n(pred, n));
        y.extend(std::iter::repeat_n(label, n));
    }
    (p, y)
}

fn brute_force_auc(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi == CRITICAL && yj != CRITICAL {
                pairs += 1;
                if scores[i] > scores[j] {
                    twice_wins += 2;
                } else if scores[i] == scores[j] {
                    twice_wins += 1;
                }
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

fn metric_oracles() -> Outcome {
    for (i, &(counts, crit, non, mac)) in TABLES.iter().enumerate() {
        let (p, y) = table_vectors(counts);
        let s = f1_scores(&p, &y).map_err(|e| e.to_string())?;
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        ensure(
            close(s.critical_f1, crit) && close(s.non_critical_f1, non) && close(s.macro_f1, mac),
            || format!("table {i} {counts:?}: got {s:?}, expected ({crit}, {non}, {mac})"),
        )?;
    }
    let mut r = rng(77);
    let mut datasets = 0;
    for n in 2..=200usize {
        for _ in 0..3 {
            let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
            if labels.iter().all(|&y| y == labels[0]) {
                continue;
            }
            // Coarse scores force ties.
            let levels = r.random_range(1..12);
            let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
            let got = auc(&scores, &labels).map_err(|e| e.to_string())?;
            let want = brute_force_auc(&scores, &labels);
            ensure(got == want, || format!("AUC {got} vs brute force {want} (n={n})"))?;
            datasets += 1;
        }
    }
    Ok(format!("20 confusion tables; AUC exact on {datasets} datasets of 2..=200 examples"))
}

// ---------------------------------------------------------------- criterion 8

const FUZZ_PIECES: &[&str] = &[
    "Flood", "HELP", "water", "rising", "123", "4th", "rt", "RT", "@user_1", "@Red_Cross", "#PrayFor", "#help",
    "http://t.co/AbC123", "https://example.org/x?y=1", "www.news.com/page", "bit.ly/xyz", "😱", "🙏🏽", "!!!", "...",
    "...?", "&amp;", "<3", "naïve", "Zürich", "東京", "Ελλάδα", "مرحبا", "\t", "\n", "\u{a0}", "  ", "\u{2014}", "'s", "don't",
    "e-mail", "$100", "50%", "#", "@", "://", "ÅNGSTRÖM", "ﬁre", "x\u{301}",
];

fn fuzz_text(r: &mut ChaCha8Rng) -> String {
    let n = r.random_range(0..25);
    let mut s = String::new();
    for _ in 0..n {
        if r.random_bool(0.15) {
            let len = r.random_range(1..6);
            s.extend((0..len).map(|_| char::from_u32(r.random_range(0x20..0x3000)).unwrap_or('?')));
        } else {
            s.push_str(FUZZ_PIECES.choose(r).unwrap());
        }
        if r.random_bool(0.7) {
            s.push(' ');
        }
    }
    s
}

fn fuzz_words(r: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    const SYL: &[&str] = &["ka", "lo", "mi", "tu", "re", "sa", "no", "pi", "e", "a", "o", "ri", "ven", "dor", "str", "ul"];
    let mut set = std::collections::BTreeSet::new();
    while set.len() < n {
        let k = r.random_range(1..5);
        let w: String = (0..k).map(|_| *SYL.choose(r).unwrap()).collect();
        set.insert(w);
    }
    set.into_iter().collect()
}

/// Minimal number of dictionary words covering `token`, if any cover exists.
fn dp_min_cover(token: &str, words: &Wordlist) -> Option<usize> {
    let n = token.len();
    let mut best: Vec<Option<usize>> = vec![None; n + 1];
    best[0] = Some(0);
    for end in 1..=n {
        for start in 0..end {
            if let Some(b) = best[start] {
                if words.contains(&token[start..end]) {
                    best[end] = Some(best[end].map_or(b + 1, |c: usize| c.min(b + 1)));
                }
            }
        }
    }
    best[n]
}

fn pipeline_correctness() -> Outcome {
    let mut r = rng(99);
    let dict = Wordlist::new(["flood", "water", "help", "rising", "pray", "for", "rt", "red", "cross"]).unwrap();
    for i in 0..1000 {
        let raw = fuzz_text(&mut r);
        let once = clean(&raw);
        ensure(clean(&once) == once, || format!("tweet {i}: clean not idempotent on {raw:?}"))?;
        ensure(once.chars().all(|c| matches!(c, 'a'..='z' | '0'..='9' | ' ')), || {
            format!("tweet {i}: {once:?} has characters outside [a-z0-9 ]")
        })?;
        let toks = preprocess(&raw, &dict);
        ensure(toks.iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)), || {
            format!("tweet {i}: token with whitespace in {toks:?}")
        })?;
    }

    let list = fuzz_words(&mut r, 10_000);
    let words = Wordlist::new(list.iter().map(String::as_str)).unwrap();
    let mut disagreements = 0;
    for i in 0..500 {
        let k = r.random_range(1..5);
        let token: String = (0..k).map(|_| list.choose(&mut r).unwrap().as_str()).collect();
        let seg = segment(&token, &words);
        let lossless = seg.concat() == token && seg.iter().all(|w| words.contains(w));
        let fallback = seg == [token.clone()];
        ensure(lossless || fallback, || format!("cover {i}: {seg:?} neither covers {token:?} nor falls back"))?;
        let optimal = dp_min_cover(&token, &words).expect("built from dictionary words");
        if !lossless || seg.len() != optimal {
            disagreements += 1;
        }
    }
    let rate = disagreements as f64 / 500.0;
    ensure(rate < 0.02, || format!("greedy-vs-optimal disagreement {rate:.3} >= 0.02"))?;
    Ok(format!(
        "1000 fuzz tweets idempotent and in charset; 500 covers over 10k words, greedy-vs-optimal disagreement {:.1}%",
        100.0 * rate
    ))
}

// ---------------------------------------------------------------- criterion 9

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let bin = env!("CARGO_BIN_EXE_debias");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    };
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let synth = root.join("synth");
    run(&["gen-synth", "--tweets-per-event", "60", "--embedding-dim", "8", "--seed", "4", "--out", &s(&synth)])?;
    let prep = root.join("prep");
    run(&[
        "preprocess",
        "--input",
        &s(&synth.join("tweets.jsonl")),
        "--wordlist",
        &s(&synth.join("wordlist.txt")),
        "--embeddings",
        &s(&synth.join("embeddings.txt")),
        "--out",
        &s(&prep),
    ])?;
    let loo = |name: &str| -> Result<Vec<u8>, String> {
        let out = root.join(name);
        run(&[
            "loo-eval",
            "--data",
            &s(&prep.join("clean.jsonl")),
            "--embeddings",
            &s(&synth.join("embeddings.txt")),
            "--architecture",
            "adversarial",
            "--hidden",
            "8",
            "--epochs",
            "3",
            "--seed",
            "17",
            "--out",
            &s(&out),
        ])?;
        std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
    };
    let (a, b) = (loo("run_a")?, loo("run_b")?);
    ensure(a == b, || "report JSON differs between identical runs".into())?;
    Ok(format!("two adversarial loo-eval runs gave byte-identical {}-byte reports", a.len()))
}

// --------------------------------------------------------------- criterion 10

fn overfit_sanity() -> Outcome {
    let mut r = rng(5);
    let fillers = ["water", "road", "rain", "news", "photo", "bridge", "storm", "river", "town", "power"];
    let mut all = fillers.to_vec();
    all.push("sos");
    let emb = toy_embedding(&mut r, &all, 50);
    let vocab = emb.vocab().clone();
    let examples: Vec<LabeledExample> = (0..64)
        .map(|i| {
            let crit = usize::from(i % 2 == 0);
            let len = r.random_range(3..9);
            let mut toks: Vec<&str> = (0..len).map(|_| *fillers.choose(&mut r).unwrap()).collect();
            if crit == 1 {
                let at = r.random_range(0..=toks.len());
                toks.insert(at, "sos");
            }
            LabeledExample {
                id: format!("toy{i}"),
                token_ids: vocab.encode(&toks),
                crit,
                event: None,
                event_id: "toy".into(),
                event_type: "toy".into(),
            }
        })
        .collect();
    let model = Classifier::new(Architecture::Baseline, emb, 0, &ModelConfig::default(), 3).unwrap();
    let cfg = TrainConfig::default();
    let outcome = train(model, &examples, &examples, &cfg).map_err(|e| e.to_string())?;
    let first = outcome.history.epochs.iter().find(|e| e.dev_critical_f1 == 1.0);
    match first {
        Some(e) => Ok(format!(
            "critical F1 1.0 first reached at epoch {} of {} (lr {}, batch {})",
            e.epoch, cfg.epochs, cfg.learning_rate, cfg.batch_size
        )),
        None => Err(format!("best critical F1 {:.4} after {} epochs", outcome.history.best_score, cfg.epochs)),
    }
}

// -------------------------------------------------------------------- runner

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut synthetic = Synthetic { single: None };
    let criteria: Vec<(&str, Box<dyn FnMut() -> Outcome + '_>)> = vec![
        ("gradient correctness", Box::new(gradient_correctness)),
        ("gradient reversal algebra", Box::new(grl_algebra)),
        ("architecture equivalences", Box::new(architecture_equivalences)),
        ("synthetic bias removal", Box::new(|| Ok(String::new()))),
        ("entanglement sensitivity", Box::new(|| Ok(String::new()))),
        ("saliency direction", Box::new(|| Ok(String::new()))),
        ("metric oracles", Box::new(metric_oracles)),
        ("pipeline correctness", Box::new(pipeline_correctness)),
        ("determinism", Box::new(determinism)),
        ("overfit sanity", Box::new(overfit_sanity)),
    ];
    let mut failed = 0;
    for (i, (name, mut check)) in criteria.into_iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let result = match i {
            3 => panic::catch_unwind(AssertUnwindSafe(|| bias_removal(&mut synthetic))),
            4 => panic::catch_unwind(AssertUnwindSafe(|| entanglement(&mut synthetic))),
            5 => panic::catch_unwind(AssertUnwindSafe(|| saliency_direction(&mut synthetic))),
            _ => panic::catch_unwind(AssertUnwindSafe(&mut check)),
        }
        .unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
