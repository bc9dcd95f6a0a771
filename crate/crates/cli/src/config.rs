use std::path::{Path, PathBuf};

use alreview_core::active_loop::ExperimentConfig;
use alreview_core::taxonomy::Taxonomy;
use anyhow::{Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// Input of `simulate`. Relative paths resolve against the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub corpus: PathBuf,
    /// Pretrained vectors; required by settings with pretrained embeddings.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub taxonomy: Taxonomy,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl SimulateConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        self.corpus = base.join(&self.corpus);
        if let Some(e) = &self.embeddings {
            self.embeddings = Some(base.join(e));
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Logs the fully resolved configuration so a run can be reproduced.
pub fn echo<T: Serialize>(what: &str, config: &T) -> Result<()> {
    log::info!("resolved {what} config: {}", serde_json::to_string(config)?);
    Ok(())
}
