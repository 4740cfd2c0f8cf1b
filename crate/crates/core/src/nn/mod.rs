//! Embedding lookup, stacked LSTM encoder, linear heads and gradient reversal.

mod embedding;
mod grl;
mod head;
mod lstm;

pub use embedding::{embedding_tokens, EmbeddingTable, UNK_STD};
pub use grl::GradientReversal;
pub use head::{BoundHead, LinearHead};
pub use lstm::{BoundLstm, Lstm, LstmLayer, GATE_ORDER};
