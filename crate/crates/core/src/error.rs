use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind} id {id} out of range (limit {limit})")]
    IdRange {
        kind: &'static str,
        id: usize,
        limit: usize,
    },
    #[error("lookup failed: {0}")]
    Lookup(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("cannot merge ensemble: {0}")]
    Merge(String),
    #[error("model format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    #[error("boosting failed: {0}")]
    Boosting(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures caused by numerical blow-up rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}
