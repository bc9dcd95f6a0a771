use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty or whitespace-only")]
    EmptyText,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("embedding file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("input sequence has no steps")]
    EmptySequence,
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("labeled pool is empty")]
    EmptyPool,
    #[error("no unlabeled samples remain")]
    PoolExhausted,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus line {line}: {msg}")]
    Ingest { line: usize, msg: String },
    #[error("unknown label {label:?} for {task}")]
    Taxonomy { task: String, label: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
