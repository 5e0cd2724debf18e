//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("record {index}: feature dimension {got} does not match store dimension {expected}")]
    DimMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("record {index}: duplicate id {id}")]
    DuplicateId { index: usize, id: u32 },

    #[error("feature payload truncated at record {index}: manifest declares {declared} records, payload holds {complete} complete records")]
    TruncatedPayload {
        index: usize,
        declared: usize,
        complete: usize,
    },

    #[error("record id {id}: zero-norm feature cannot be normalized")]
    ZeroNorm { id: u32 },

    #[error("unknown record id {id}")]
    MissingRecord { id: u32 },

    #[error("gallery holds {gallery} records but the sampler requires k1 = {k1}")]
    GalleryTooSmall { gallery: usize, k1: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("non-finite loss at epoch {epoch}; last good checkpoint retained")]
    NonFiniteLoss { epoch: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data validation, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NonFiniteGradient { .. }
            | Error::NonFiniteLoss { .. }
            | Error::Numeric(_) => 4,
            _ => 3,
        }
    }
}
