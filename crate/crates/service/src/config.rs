use std::path::{Path, PathBuf};

use alreview_core::embeddings::DEFAULT_MAX_SEQ_LEN;
use alreview_core::active_loop::DEFAULT_SELF_TRAINED_DIM;
use alreview_core::metrics::DEFAULT_THRESHOLD;
use alreview_core::par::Exec;
use alreview_core::seqmodel::Hyperparams;
use alreview_core::taxonomy::{Task, Taxonomy};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// Default reservation of a queued task for one annotator: 15 minutes.
pub const DEFAULT_LEASE_SECS: u64 = 15 * 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSource {
    /// Frozen vectors read from `file`, relative to the store directory.
    Pretrained { file: PathBuf },
    SelfTrained { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub taxonomy: Taxonomy,
    pub hyper: Hyperparams,
    pub embedding: EmbeddingSource,
    pub driver_task: Task,
    pub threshold: f64,
    pub force_top1: bool,
    pub max_seq_len: usize,
    pub min_count: usize,
    pub lease_secs: u64,
    /// Start a retrain after this many submissions; manual only when unset.
    pub auto_retrain_every: Option<usize>,
    pub exec: Exec,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            taxonomy: Taxonomy::default(),
            hyper: Hyperparams::default(),
            embedding: EmbeddingSource::SelfTrained { dim: DEFAULT_SELF_TRAINED_DIM },
            driver_task: Task::Aspect,
            threshold: DEFAULT_THRESHOLD,
            force_top1: false,
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            min_count: 1,
            lease_secs: DEFAULT_LEASE_SECS,
            auto_retrain_every: None,
            exec: Exec::default(),
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<()> {
        self.taxonomy.validate()?;
        self.hyper.validate()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ServiceError::BadRequest("threshold must be in (0, 1)".into()));
        }
        if self.max_seq_len == 0 || self.lease_secs == 0 || self.auto_retrain_every == Some(0) {
            return Err(ServiceError::BadRequest("max_seq_len, lease_secs and auto_retrain_every must be positive".into()));
        }
        if let EmbeddingSource::SelfTrained { dim: 0 } = self.embedding {
            return Err(ServiceError::BadRequest("embedding dim must be positive".into()));
        }
        Ok(())
    }

    pub fn embedding_path(&self, store: &Path) -> Option<PathBuf> {
        match &self.embedding {
            EmbeddingSource::Pretrained { file } => Some(store.join(file)),
            EmbeddingSource::SelfTrained { .. } => None,
        }
    }
}
