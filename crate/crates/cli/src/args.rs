use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use debias_core::Architecture;

#[derive(Debug, Parser)]
#[command(name = "debias", version, about = "Event-debiased criticality classification of crisis posts")]
pub struct Cli {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean and tokenize raw JSONL posts and build the vocabulary.
    Preprocess(PreprocessArgs),
    /// Train one model on the events of a type.
    Train(TrainArgs),
    /// Leave-one-event-out training and held-out evaluation.
    LooEval(LooEvalArgs),
    /// Generate a synthetic corpus with a planted event shortcut.
    GenSynth(GenSynthArgs),
    /// Per-token gradient saliency of a trained model.
    Saliency(SaliencyArgs),
    /// Score a trained model on labeled data.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Run directory; must be new or empty unless --force is given.
    #[arg(long)]
    pub out: PathBuf,

    /// Overwrite outputs in an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Raw posts, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,

    /// Newline-delimited dictionary for filtering and segmentation.
    #[arg(long)]
    pub wordlist: Option<PathBuf>,

    /// Restrict the vocabulary to tokens with a vector in this GloVe-format file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Preprocessed posts (output of `preprocess`).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Vocabulary; defaults to vocab.txt next to the data file.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// GloVe-format word vectors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// baseline, multitask or adversarial.
    #[arg(short, long)]
    pub architecture: Option<Architecture>,

    /// Event type, or several joined with `+` to pool them.
    #[arg(long)]
    pub event_type: Option<String>,

    /// Gradient-reversal scale.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// LSTM hidden size (default 100)
    #[arg(long)]
    pub hidden: Option<usize>,

    /// Stacked LSTM layers (default 2)
    #[arg(long)]
    pub layers: Option<usize>,

    /// Training epochs (default 40)
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Posts per batch (default 16)
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Adam learning rate (default 0.01)
    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Gradient clipping norm.
    #[arg(long, conflicts_with = "no_clip")]
    pub clip_norm: Option<f64>,

    /// Disable gradient clipping.
    #[arg(long)]
    pub no_clip: bool,

    /// Share of the training events set aside for epoch selection.
    #[arg(long)]
    pub dev_fraction: Option<f64>,

    /// Seeds initialization, shuffling and the selection split (default 0)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Fine-tune the word vectors.
    #[arg(long)]
    pub train_embeddings: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Leave this event out of training and report metrics on it.
    #[arg(long)]
    pub held_out: Option<String>,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct LooEvalArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// JSON spec to start from; the flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,

    /// Comma-separated event types.
    #[arg(long, value_delimiter = ',')]
    pub types: Option<Vec<String>>,

    /// Events generated per type (default 5)
    #[arg(long)]
    pub events_per_type: Option<usize>,

    /// Posts per event (default 600)
    #[arg(long)]
    pub tweets_per_event: Option<usize>,

    /// Strength of the label/place-name coupling in biased events.
    #[arg(long)]
    pub bias: Option<f64>,

    /// Index of the unbiased event within each type.
    #[arg(long)]
    pub unbiased_event: Option<usize>,

    /// Word-vector dimension (default 32)
    #[arg(long)]
    pub embedding_dim: Option<usize>,

    /// Generator seed (default 0)
    #[arg(long)]
    pub seed: Option<u64>,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,

    /// Only posts of this event.
    #[arg(long)]
    pub event: Option<String>,

    /// At most this many posts.
    #[arg(long)]
    pub limit: Option<usize>,

    /// JSON output file.
    #[arg(long)]
    pub out: PathBuf,

    /// Also write a shaded plain-text rendering here.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[command(flatten)]
    pub data: DataArgs,

    /// Only posts of this event.
    #[arg(long)]
    pub event: Option<String>,

    /// Write the JSON scores here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
