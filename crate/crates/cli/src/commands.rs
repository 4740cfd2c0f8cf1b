//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use debias_core::checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
use debias_core::data::synth::{gen_synth, SynthSpec};
use debias_core::data::{
    make_training_split, read_jsonl, to_examples, write_jsonl, CleanTweet, EventScope, RawTweet,
};
use debias_core::eval::{render_text, saliency, score_split};
use debias_core::experiment::{loo_report, loo_splits, preprocess_records, run_split, train_split, ExperimentConfig};
use debias_core::nn::{embedding_tokens, EmbeddingTable};
use debias_core::text::{build_vocab, Vocab, Wordlist};
use debias_core::train::predict;
use debias_core::{Architecture, Classifier, Error, LabeledExample, ModelConfig, Result, TrainConfig};
use log::{info, warn};
use serde::Serialize;

use crate::args::{DataArgs, EvalArgs, GenSynthArgs, LooEvalArgs, ModelArgs, PreprocessArgs, SaliencyArgs, TrainArgs};
use crate::config::FileConfig;
use crate::rundir::{Manifest, RunDir};

const DEFAULT_ARCHITECTURE: Architecture = Architecture::Adversarial;

fn read_input(path: &Path) -> Result<Vec<u8>> {
    if !path.is_file() {
        return Err(Error::Config(format!("input file {} does not exist", path.display())));
    }
    Ok(fs::read(path)?)
}

fn required_path(flag: &Option<PathBuf>, cfg: &FileConfig, key: &str) -> Result<PathBuf> {
    cfg.resolve_opt(flag.clone(), key)?
        .ok_or_else(|| Error::Config(format!("--{} is required (flag or config key {key})", key.replace('_', "-"))))
}

fn parse_records<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>> {
    let records: Vec<T> = read_jsonl(bytes)?;
    if records.is_empty() {
        return Err(Error::EmptyInput("no records"));
    }
    Ok(records)
}

/// Preprocessed records and the vocabulary they were indexed with.
struct Dataset {
    records: Vec<CleanTweet>,
    vocab: Vocab,
}

fn load_dataset(args: &DataArgs, cfg: &FileConfig, manifest: &mut Manifest) -> Result<Dataset> {
    let data_path = required_path(&args.data, cfg, "data")?;
    let data = read_input(&data_path)?;
    manifest.input("data", &data_path, &data);
    let records = parse_records(&data)?;

    let vocab_path = match cfg.resolve_opt(args.vocab.clone(), "vocab")? {
        Some(p) => p,
        None => data_path.with_file_name("vocab.txt"),
    };
    let vocab_bytes = read_input(&vocab_path)?;
    manifest.input("vocab", &vocab_path, &vocab_bytes);
    let vocab = Vocab::read_from(vocab_bytes.as_slice())?;
    Ok(Dataset { records, vocab })
}

fn resolve_experiment(args: &ModelArgs, cfg: &FileConfig) -> Result<(ExperimentConfig, u64)> {
    let md = ModelConfig::default();
    let td = TrainConfig::default();
    let clip_norm = if args.no_clip {
        None
    } else if let Some(c) = args.clip_norm {
        Some(c)
    } else {
        match cfg.get::<String>("clip_norm")? {
            Some(v) if v.eq_ignore_ascii_case("none") => None,
            Some(_) => cfg.get::<f64>("clip_norm")?,
            None => td.clip_norm,
        }
    };
    let train_embeddings = args.train_embeddings || cfg.get::<bool>("train_embeddings")?.unwrap_or(md.train_embeddings);
    let lambda = cfg.resolve(args.lambda, "lambda", md.lambda)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be a finite value >= 0, got {lambda}")));
    }
    let seed = cfg.resolve(args.seed, "seed", td.seed)?;
    let config = ExperimentConfig {
        model: ModelConfig {
            hidden: cfg.resolve(args.hidden, "hidden", md.hidden)?,
            layers: cfg.resolve(args.layers, "layers", md.layers)?,
            lambda,
            train_embeddings,
        },
        train: TrainConfig {
            batch_size: cfg.resolve(args.batch_size, "batch_size", td.batch_size)?,
            epochs: cfg.resolve(args.epochs, "epochs", td.epochs)?,
            learning_rate: cfg.resolve(args.learning_rate, "learning_rate", td.learning_rate)?,
            clip_norm,
            seed,
        },
        dev_fraction: cfg.resolve(args.dev_fraction, "dev_fraction", 0.1)?,
    };
    config.validate()?;
    Ok((config, seed))
}

/// The configured scope, or the only event type present in the data.
fn resolve_scope(args: &ModelArgs, cfg: &FileConfig, examples: &[LabeledExample]) -> Result<EventScope> {
    if let Some(s) = cfg.resolve_opt(args.event_type.clone(), "event_type")? {
        return EventScope::parse(&s);
    }
    let mut types: Vec<&str> = examples.iter().map(|e| e.event_type.as_str()).collect();
    types.sort_unstable();
    types.dedup();
    match types.as_slice() {
        [only] => Ok(EventScope::Single(only.to_string())),
        _ => Err(Error::Config(format!(
            "data holds several event types ({}); choose one with --event-type",
            types.join(", ")
        ))),
    }
}

fn load_embedding(args: &ModelArgs, cfg: &FileConfig, vocab: Vocab, seed: u64, manifest: &mut Manifest) -> Result<EmbeddingTable> {
    let path = required_path(&args.embeddings, cfg, "embeddings")?;
    let bytes = read_input(&path)?;
    manifest.input("embeddings", &path, &bytes);
    EmbeddingTable::from_glove(vocab, bytes.as_slice(), seed)
}

/// Common set-up of `train` and `loo-eval`.
struct Prepared {
    architecture: Architecture,
    scope: EventScope,
    config: ExperimentConfig,
    seed: u64,
    examples: Vec<LabeledExample>,
    vocab: Vocab,
}

fn prepare(data: &DataArgs, model: &ModelArgs, cfg: &FileConfig, manifest: &mut Manifest) -> Result<Prepared> {
    let architecture = cfg.resolve(model.architecture, "architecture", DEFAULT_ARCHITECTURE)?;
    let (config, seed) = resolve_experiment(model, cfg)?;
    let ds = load_dataset(data, cfg, manifest)?;
    let examples = to_examples(&ds.records, &ds.vocab)?;
    let scope = resolve_scope(model, cfg, &examples)?;
    manifest.seed = Some(seed);
    manifest.config = config.to_map();
    manifest.set("architecture", architecture);
    manifest.set("event_type", scope.name());
    manifest.set("seed", seed);
    Ok(Prepared {
        architecture,
        scope,
        config,
        seed,
        examples,
        vocab: ds.vocab,
    })
}

fn checkpoint_settings(p: &Prepared, held_out: &str) -> BTreeMap<String, String> {
    let mut m = p.config.to_map();
    m.insert("architecture".into(), p.architecture.to_string());
    m.insert("event_type".into(), p.scope.name());
    m.insert("seed".into(), p.seed.to_string());
    if !held_out.is_empty() {
        m.insert("held_out".into(), held_out.to_string());
    }
    m
}

fn checkpoint_bytes(model: &Classifier, settings: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, model, settings)?;
    Ok(buf)
}

pub fn preprocess(args: &PreprocessArgs, cfg: &FileConfig) -> Result<()> {
    let mut manifest = Manifest::new("preprocess");
    let wordlist_path = required_path(&args.wordlist, cfg, "wordlist")?;
    let input = read_input(&args.input)?;
    let raw: Vec<RawTweet> = parse_records(&input)?;
    let wl_bytes = read_input(&wordlist_path)?;
    let words = Wordlist::from_reader(wl_bytes.as_slice())?;
    let emb_path = cfg.resolve_opt(args.embeddings.clone(), "embeddings")?;
    let emb_bytes = emb_path.as_deref().map(read_input).transpose()?;

    let clean = preprocess_records(&raw, &words)?;
    if clean.is_empty() {
        return Err(Error::EmptyInput("no records left after cleaning"));
    }
    let corpus: Vec<&Vec<String>> = clean.iter().map(|c| &c.tokens).collect();
    let corpus: Vec<Vec<&str>> = corpus.iter().map(|t| t.iter().map(String::as_str).collect()).collect();
    let vocab = match &emb_bytes {
        Some(b) => build_vocab(&corpus, &embedding_tokens(b.as_slice())?)?,
        None => Vocab::from_corpus(&corpus)?,
    };

    let dir = RunDir::create(&args.out.out, args.out.force)?;
    let mut out = Vec::new();
    write_jsonl(&mut out, &clean)?;
    dir.write("clean.jsonl", &out)?;
    let mut vbytes = Vec::new();
    vocab.write_to(&mut vbytes)?;
    dir.write("vocab.txt", &vbytes)?;

    manifest.input("input", &args.input, &input);
    manifest.input("wordlist", &wordlist_path, &wl_bytes);
    if let (Some(p), Some(b)) = (&emb_path, &emb_bytes) {
        manifest.input("embeddings", p, b);
    }
    manifest.set("records_in", raw.len());
    manifest.set("records_out", clean.len());
    manifest.set("vocab_size", vocab.len());
    manifest.set("vocab_hash", vocab.content_hash());
    manifest.outputs = vec!["clean.jsonl".into(), "vocab.txt".into()];
    dir.write_json("manifest.json", &manifest)?;
    let dropped = raw.len() - clean.len();
    if dropped > 0 {
        warn!("dropped {dropped} records with no tokens after cleaning");
    }
    println!("{} records, {} vocabulary entries", clean.len(), vocab.len());
    Ok(())
}

pub fn train(args: &TrainArgs, cfg: &FileConfig) -> Result<()> {
    let mut manifest = Manifest::new("train");
    let p = prepare(&args.data, &args.model, cfg, &mut manifest)?;
    let held_out = args.held_out.as_deref();
    let split = make_training_split(&p.examples, &p.scope, held_out, p.architecture.min_events() - 1)?;
    let dir = RunDir::create(&args.out.out, args.out.force)?;
    let embedding = load_embedding(&args.model, cfg, p.vocab.clone(), p.seed, &mut manifest)?;
    if let Some(h) = held_out {
        manifest.set("held_out", h);
    }
    info!(
        "training {} on {} events ({} examples)",
        p.architecture,
        split.event_count(),
        split.train.len()
    );
    let outcome = train_split(p.architecture, &embedding, &split, &p.config, p.seed)?;
    let settings = checkpoint_settings(&p, &split.held_out_event);
    dir.write("model.ckpt", &checkpoint_bytes(&outcome.best, &settings)?)?;
    dir.write_json("history.json", &outcome.history)?;
    manifest.outputs = vec!["model.ckpt".into(), "history.json".into()];

    if held_out.is_some() {
        let preds = predict(&outcome.best, &split.test)?;
        let labels: Vec<usize> = split.test.iter().map(|e| e.crit).collect();
        let mut metrics = score_split(&split.held_out_event, &preds, &labels)?;
        metrics.best_epoch = Some(outcome.history.best_epoch);
        let report = loo_report(p.architecture, std::slice::from_ref(&split), &p.config, p.seed, vec![metrics])?;
        dir.write("report.json", report.to_json()?.as_bytes())?;
        manifest.outputs.push("report.json".into());
        println!(
            "held out {}: critical F1 {:.4}, macro F1 {:.4}",
            split.held_out_event, report.mean.critical_f1, report.mean.macro_f1
        );
    } else {
        println!(
            "trained {} on {} events; best epoch {}",
            p.architecture,
            split.event_count(),
            outcome.history.best_epoch
        );
    }
    dir.write_json("manifest.json", &manifest)?;
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn loo_eval(args: &LooEvalArgs, cfg: &FileConfig) -> Result<()> {
    let mut manifest = Manifest::new("loo-eval");
    let p = prepare(&args.data, &args.model, cfg, &mut manifest)?;
    // Protocol check before any output is written or any model is trained.
    let splits = loo_splits(p.architecture, &p.examples, &p.scope)?;
    let dir = RunDir::create(&args.out.out, args.out.force)?;
    let embedding = load_embedding(&args.model, cfg, p.vocab.clone(), p.seed, &mut manifest)?;

    let mut metrics = Vec::with_capacity(splits.len());
    let mut histories = BTreeMap::new();
    for (i, split) in splits.iter().enumerate() {
        info!("split {}/{}: holding out {}", i + 1, splits.len(), split.held_out_event);
        let run = run_split(p.architecture, &embedding, split, &p.config, p.seed)?;
        let name = format!("checkpoints/{:02}-{}.ckpt", i, sanitize(&split.held_out_event));
        let settings = checkpoint_settings(&p, &split.held_out_event);
        dir.write(&name, &checkpoint_bytes(&run.model, &settings)?)?;
        manifest.outputs.push(name);
        histories.insert(split.held_out_event.clone(), run.history);
        metrics.push(run.metrics);
    }
    let report = loo_report(p.architecture, &splits, &p.config, p.seed, metrics)?;
    dir.write("report.json", report.to_json()?.as_bytes())?;
    dir.write_json("histories.json", &histories)?;
    manifest.outputs.extend(["report.json".into(), "histories.json".into()]);
    dir.write_json("manifest.json", &manifest)?;
    println!(
        "{} over {} splits: macro F1 {:.4}, non-critical F1 {:.4}, critical F1 {:.4}",
        p.architecture,
        splits.len(),
        report.mean.macro_f1,
        report.mean.non_critical_f1,
        report.mean.critical_f1
    );
    Ok(())
}

pub fn gen_synth_cmd(args: &GenSynthArgs) -> Result<()> {
    let mut manifest = Manifest::new("gen-synth");
    let mut spec = match &args.spec {
        Some(p) => {
            let bytes = read_input(p)?;
            manifest.input("spec", p, &bytes);
            serde_json::from_slice(&bytes).map_err(|e| Error::Spec(e.to_string()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(t) = &args.types {
        spec.event_types = t.clone();
    }
    if let Some(v) = args.events_per_type {
        spec.events_per_type = v;
    }
    if let Some(v) = args.tweets_per_event {
        spec.tweets_per_event = v;
    }
    if let Some(v) = args.bias {
        spec.bias = v;
    }
    if let Some(v) = args.unbiased_event {
        spec.unbiased_event = v;
    }
    if let Some(v) = args.embedding_dim {
        spec.embedding_dim = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    let corpus = gen_synth(&spec)?;
    let dir = RunDir::create(&args.out.out, args.out.force)?;
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &corpus.tweets)?;
    dir.write("tweets.jsonl", &buf)?;
    let mut buf = Vec::new();
    corpus.write_embeddings(&mut buf)?;
    dir.write("embeddings.txt", &buf)?;
    let mut buf = Vec::new();
    corpus.write_wordlist(&mut buf)?;
    dir.write("wordlist.txt", &buf)?;
    dir.write_json("metadata.json", &corpus.metadata)?;
    manifest.seed = Some(spec.seed);
    manifest.set("spec", serde_json::to_string(&spec)?);
    manifest.outputs = ["tweets.jsonl", "embeddings.txt", "wordlist.txt", "metadata.json"]
        .map(String::from)
        .to_vec();
    dir.write_json("manifest.json", &manifest)?;
    println!(
        "{} posts over {} events",
        corpus.tweets.len(),
        spec.event_types.len() * spec.events_per_type
    );
    Ok(())
}

/// A checkpoint plus the labeled examples it should be applied to, indexed
/// with the checkpoint's own vocabulary after checking it matches the data's.
fn load_for_inference(
    checkpoint: &Path,
    data: &DataArgs,
    event: Option<&str>,
    cfg: &FileConfig,
) -> Result<(Classifier, CheckpointHeader, Vec<LabeledExample>)> {
    // Inputs are not recorded: these commands write single files, not runs.
    let mut manifest = Manifest::new("inference");
    let bytes = read_input(checkpoint)?;
    let (model, header) = read_checkpoint(BufReader::new(bytes.as_slice()))?;
    let ds = load_dataset(data, cfg, &mut manifest)?;
    let data_hash = ds.vocab.content_hash();
    if data_hash != header.vocab_hash {
        return Err(Error::Compatibility(format!(
            "checkpoint vocabulary {} does not match the data vocabulary {}",
            &header.vocab_hash[..12.min(header.vocab_hash.len())],
            &data_hash[..12.min(data_hash.len())]
        )));
    }
    let mut examples = to_examples(&ds.records, model.embedding().vocab())?;
    if let Some(ev) = event {
        examples.retain(|e| e.event_id == ev);
        if examples.is_empty() {
            let mut present: Vec<&str> = ds.records.iter().map(|r| r.event_id.as_str()).collect();
            present.sort_unstable();
            present.dedup();
            return Err(Error::Config(format!(
                "no records of event {ev:?}; events present: {}",
                present.join(", ")
            )));
        }
    }
    Ok((model, header, examples))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(fs::write(path, bytes)?)
}

pub fn saliency_cmd(args: &SaliencyArgs, cfg: &FileConfig) -> Result<()> {
    let (model, _, mut examples) = load_for_inference(&args.checkpoint, &args.data, args.event.as_deref(), cfg)?;
    if let Some(n) = args.limit {
        examples.truncate(n);
    }
    let maps = examples
        .iter()
        .map(|e| saliency(&model, e))
        .collect::<Result<Vec<_>>>()?;
    let mut json = serde_json::to_vec_pretty(&maps)?;
    json.push(b'\n');
    write_output(&args.out, &json)?;
    if let Some(t) = &args.text {
        let mut text = String::new();
        for m in &maps {
            text.push_str(&format!(
                "{} true={} predicted={}\n{}\n{}\n\n",
                m.id,
                m.true_class,
                m.predicted,
                m.tokens.join(" "),
                render_text(m)
            ));
        }
        write_output(t, text.as_bytes())?;
    }
    println!("{} saliency maps", maps.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    architecture: Architecture,
    events: Vec<String>,
    #[serde(flatten)]
    metrics: debias_core::eval::SplitMetrics,
}

pub fn eval_cmd(args: &EvalArgs, cfg: &FileConfig) -> Result<()> {
    let (model, header, examples) = load_for_inference(&args.checkpoint, &args.data, args.event.as_deref(), cfg)?;
    let preds = predict(&model, &examples)?;
    let labels: Vec<usize> = examples.iter().map(|e| e.crit).collect();
    let mut events: Vec<String> = examples.iter().map(|e| e.event_id.clone()).collect();
    events.sort();
    events.dedup();
    let name = args.event.clone().unwrap_or_else(|| "all".into());
    let out = EvalOutput {
        architecture: header.architecture,
        events,
        metrics: score_split(&name, &preds, &labels)?,
    };
    let mut json = serde_json::to_vec_pretty(&out)?;
    json.push(b'\n');
    match &args.out {
        Some(p) => write_output(p, &json)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    Ok(())
}
