//! Adversarial removal of event-specific bias for criticality classification
//! of short crisis posts.
//!
//! A stacked LSTM encoder feeds a criticality head; the multitask variant adds
//! an event head, and the adversarial variant puts a gradient-reversal layer in
//! front of it so the encoder is pushed to forget which event a post came from.

pub mod autograd;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod optim;
pub mod tensor;
pub mod text;
pub mod train;

pub use data::{Batch, LabeledExample, Split};
pub use error::{Error, Result};
pub use eval::{EvalReport, SaliencyMap};
pub use model::{Architecture, Classifier, ModelConfig};
pub use tensor::Tensor;
pub use train::TrainConfig;
