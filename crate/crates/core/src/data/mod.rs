//! Label collapsing, record I/O, leave-one-out splits, batching and the
//! synthetic biased-corpus generator.

mod batch;
mod records;
mod splits;
pub mod synth;

pub use batch::{make_batches, sequential_batches, Batch};
pub use records::{
    collapse_label, read_jsonl, write_jsonl, CleanTweet, Label4, RawTweet, CRITICAL, NON_CRITICAL,
};
pub use splits::{
    events_in_scope, make_loo_splits, make_training_split, stratified_holdout, to_examples, EventScope, LabeledExample, Split,
};
