//! Live annotation service: a persistent pool, an uncertainty-ranked task
//! queue with per-annotator leases, label submission with an append-only
//! audit log, and background retraining.

pub mod config;
pub mod error;
pub mod http;
pub mod state;
pub mod store;

pub use config::{EmbeddingSource, ServiceConfig};
pub use error::{Result, ServiceError};
pub use state::{AnnotationTask, Clock, JobState, MetricsReport, ServiceState, SubmitAck, SystemClock, TaskBatch, TrainStatus};
pub use store::Store;
