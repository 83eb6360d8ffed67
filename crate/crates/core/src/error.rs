use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("user `{0}` has no cluster assignment")]
    Unassigned(String),

    #[error("event #{index} ({user}, {item}): {reason}")]
    InvalidEvent {
        index: usize,
        user: String,
        item: String,
        reason: String,
    },

    #[error(
        "events out of timestamp order: #{prev_index} (t={prev_ts}) precedes #{index} (t={ts})"
    )]
    Unsorted {
        prev_index: usize,
        prev_ts: i64,
        index: usize,
        ts: i64,
    },

    #[error("model is in {expected} mode, got a {got} operation")]
    ModeMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("k-means: {0}")]
    Clustering(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
