use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("unsupported image shape {0:?}: sides must be at least 16 pixels")]
    UnsupportedShape([usize; 3]),

    #[error("malformed IDX file {path}: {reason}")]
    Idx { path: PathBuf, reason: String },

    #[error("image decode failed for {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },

    #[error("invalid imbalance spec: {0}")]
    Imbalance(String),

    #[error("invalid batch request: {0}")]
    Batch(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("generator has {0} label channels but no labels were supplied")]
    MissingLabel(usize),

    #[error("corrupt parameters: {0}")]
    CorruptParams(String),

    #[error("invalid loss input: {0}")]
    Loss(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: u64, what: String },

    #[error("malformed archive: {0}")]
    Archive(String),

    #[error("gradient check failed: {0}")]
    Gradcheck(String),

    #[error("phase `{phase}` failed: {source}")]
    Phase { phase: String, source: Box<Error> },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
