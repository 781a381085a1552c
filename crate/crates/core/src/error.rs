use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("sentence {sent_id}: {message}")]
    Shape { sent_id: String, message: String },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("feature extraction: {0}")]
    Feature(String),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("unsupported model version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
