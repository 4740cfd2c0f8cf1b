use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Shape pair carried by dimension errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shapes(pub Vec<usize>, pub Vec<usize>);

impl fmt::Display for Shapes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} vs {:?}", self.0, self.1)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {shapes}")]
    Dimension { op: &'static str, shapes: Shapes },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("label error: target {target} out of range for {classes} classes (row {row})")]
    Label {
        row: usize,
        target: usize,
        classes: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error in record {record}: {reason}")]
    Data { record: String, reason: String },

    #[error("protocol error: event type {event_type} has {count} events, {required} required")]
    Protocol {
        event_type: String,
        count: usize,
        required: usize,
    },

    #[error("training aborted: non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },

    #[error("synthetic spec error: {0}")]
    Spec(String),

    #[error("compatibility error: {0}")]
    Compatibility(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dimension(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            shapes: Shapes(left.to_vec(), right.to_vec()),
        }
    }

    pub(crate) fn data(record: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Data {
            record: record.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied data or configuration rather
    /// than by a defect in this crate.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Data { .. }
                | Error::Protocol { .. }
                | Error::Spec(_)
                | Error::Compatibility(_)
                | Error::Checkpoint(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::EmptyInput(_)
        )
    }
}
