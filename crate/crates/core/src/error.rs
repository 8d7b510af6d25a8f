use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action index {action} out of range (model has {count} actions)")]
    ActionOutOfRange { action: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid transition kernel: {0} row violation(s), first at state {1}, action {2}")]
    InvalidKernel(usize, usize, usize),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("duplicate design points {i} and {j} carry different values")]
    DuplicatePoints { i: usize, j: usize },

    #[error("interpolant envelope crossing at {index}: lower {lower} > upper {upper} (lip = {lip})")]
    EnvelopeCrossing {
        index: usize,
        lower: f64,
        upper: f64,
        lip: f64,
    },

    #[error("operation requires a tabular model")]
    NotTabular,

    #[error("operation requires a box state space")]
    NotBox,

    #[error("need at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("manifest hash mismatch for {0}")]
    HashMismatch(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
