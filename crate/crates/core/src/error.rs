use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("event {index} (onset {onset_s:.6} s): epoch window [{start}, {end}) outside recording of {n_samples} samples")]
    OutOfRange {
        index: usize,
        onset_s: f64,
        start: i64,
        end: i64,
        n_samples: usize,
    },

    #[error("unknown channel {0:?}")]
    UnknownChannel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("candidate {0:?} not present")]
    MissingCandidate(String),

    #[error("candidate {0:?} has no epochs")]
    EmptyCandidate(String),

    #[error("model fingerprint {model} does not match preprocessing fingerprint {config}")]
    FingerprintMismatch { model: String, config: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
