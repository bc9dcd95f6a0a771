use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("document {0:?} not found")]
    NotFound(String),
    #[error("document {0:?} is already labeled")]
    Conflict(String),
    #[error("unknown label {label:?} for {task}")]
    Taxonomy { task: String, label: String },
    #[error("a retrain job is already running")]
    Busy,
    #[error("no labeled documents to train on")]
    EmptyPool,
    #[error("no unlabeled documents remain")]
    PoolExhausted,
    #[error("no retrain has completed yet")]
    NoRoundsYet,
    #[error("corpus line {line}: {msg}")]
    Ingest { line: usize, msg: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("store: {0}")]
    Store(String),
    #[error(transparent)]
    Core(alreview_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Taxonomy { .. } => "taxonomy_error",
            ServiceError::Busy => "busy",
            ServiceError::EmptyPool => "empty_pool",
            ServiceError::PoolExhausted => "pool_exhausted",
            ServiceError::NoRoundsYet => "no_rounds_yet",
            ServiceError::Ingest { .. } => "ingest_error",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Store(_) | ServiceError::Core(_) | ServiceError::Io(_) | ServiceError::Json(_) => "internal",
        }
    }
}

impl From<alreview_core::Error> for ServiceError {
    fn from(e: alreview_core::Error) -> Self {
        use alreview_core::Error as E;
        match e {
            E::Taxonomy { task, label } => ServiceError::Taxonomy { task, label },
            E::Ingest { line, msg } => ServiceError::Ingest { line, msg },
            E::EmptyPool => ServiceError::EmptyPool,
            E::PoolExhausted => ServiceError::PoolExhausted,
            other => ServiceError::Core(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, ServiceError>;
