use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sentinel {sentinel:?} already occurs in the input at byte {offset}")]
    SentinelCollision { sentinel: char, offset: usize },

    #[error("document {index} contains the end-of-text marker {marker:?}")]
    EotCollision { index: usize, marker: String },

    #[error("document {index} is {bytes} bytes after preprocessing, exceeding the shard cap of {cap} bytes")]
    DocumentTooLarge { index: usize, bytes: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("target vocabulary size {k} must exceed the base alphabet size {base}")]
    InvalidK { k: usize, base: usize },

    #[error("no candidate survives filtering")]
    EmptyBoards,

    #[error("duplicate vocabulary surface {0:?}")]
    DuplicateSurface(String),

    #[error("token id {id} is outside the id space of {size} ids")]
    UnknownId { id: u32, size: usize },

    #[error("decoded bytes are not valid UTF-8")]
    InvalidUtf8,

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("malformed encoded stream: {0}")]
    MalformedStream(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("need at least {needed} distinct tokens with nonzero counts, got {got}")]
    TooFewTokens { needed: usize, got: usize },

    #[error("partition instance too large: {n} sequences (limit {limit})")]
    InstanceTooLarge { n: usize, limit: usize },

    #[error("block count {k} is invalid for {n} sequences")]
    InvalidBlockCount { k: usize, n: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
