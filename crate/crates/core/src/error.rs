use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// CSV header lacks a required column.
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    /// A cell failed to parse; `row` is the 1-based data row.
    #[error("data row {row}: {message}")]
    ParseRow { row: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Non-finite value encountered during training; `layer` is 0-based.
    #[error("non-finite value in layer {layer}: {message}")]
    NonFinite { layer: usize, message: String },

    /// Proportion pair has no model in the bank.
    #[error("no model for proportion pair ({lower}, {upper})")]
    UnknownPair { lower: f64, upper: f64 },

    #[error("infeasible dispatch: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Wraps an error with the timestamp of the sample being processed.
    #[error("sample at t={timestamp}: {source}")]
    AtSample {
        timestamp: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Attach the timestamp of the offending sample.
    pub fn at_sample(self, timestamp: u64) -> Self {
        Error::AtSample {
            timestamp,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
