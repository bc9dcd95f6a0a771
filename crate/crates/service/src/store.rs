//! Single-directory persistence.
//!
//! ```text
//! <store>/config.json      resolved service configuration
//! <store>/corpus.jsonl     every ingested row, in ingestion order
//! <store>/audit.jsonl      append-only label submissions
//! <store>/checkpoints/     one model bundle per completed retrain
//! <store>/state.json       manifest: rounds, current bundle, leases
//! ```
//!
//! The pool is never written directly; it is rebuilt by replaying the audit
//! log over the ingested corpus.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use alreview_core::active_loop::Round;
use alreview_core::corpus::{read_jsonl, write_jsonl, CorpusRow};
use alreview_core::embeddings::{EmbeddingTable, Vocabulary};
use alreview_core::seqmodel::Checkpoint;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::error::{Result, ServiceError};

pub const STATE_VERSION: u32 = 1;
pub const BUNDLE_FORMAT: &str = "alreview-bundle";

/// One accepted label submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    pub seq: u64,
    pub id: String,
    pub aspects: Vec<String>,
    pub sentiment: Vec<String>,
    pub annotator: String,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub annotator: String,
    pub queued_at: u64,
    pub expires_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub rounds: Vec<Round>,
    /// File name of the current bundle inside `checkpoints/`.
    pub checkpoint: Option<String>,
    pub leases: BTreeMap<String, Lease>,
}

/// Everything needed to score documents with one retrain's models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBundle {
    pub format: String,
    pub round: usize,
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
    pub aspect: Checkpoint,
    pub sentiment: Checkpoint,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

impl Store {
    /// Opens `root`, creating the layout and writing `config` when the
    /// directory holds no store yet.
    pub fn open_or_init(root: &Path, config: Option<&ServiceConfig>) -> Result<Self> {
        let store = Store { root: root.to_path_buf() };
        if !store.config_path().exists() {
            std::fs::create_dir_all(store.checkpoint_dir())?;
            let cfg = config.cloned().unwrap_or_default();
            cfg.validate()?;
            write_atomic(&store.config_path(), &serde_json::to_vec_pretty(&cfg)?)?;
            store.save_manifest(&Manifest { version: STATE_VERSION, ..Manifest::default() })?;
            File::create(store.corpus_path())?;
            File::create(store.audit_path())?;
        }
        Ok(store)
    }

    /// Opens an existing store.
    pub fn open(root: &Path) -> Result<Self> {
        let store = Store { root: root.to_path_buf() };
        if !store.config_path().exists() {
            return Err(ServiceError::Store(format!("{} is not a store (no config.json)", root.display())));
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    fn corpus_path(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }

    fn audit_path(&self) -> PathBuf {
        self.root.join("audit.jsonl")
    }

    fn state_path(&self) -> PathBuf {
        self.root.join("state.json")
    }

    fn checkpoint_dir(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn load_config(&self) -> Result<ServiceConfig> {
        let cfg: ServiceConfig = serde_json::from_slice(&std::fs::read(self.config_path())?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_corpus(&self) -> Result<Vec<CorpusRow>> {
        Ok(read_jsonl(BufReader::new(File::open(self.corpus_path())?))?)
    }

    pub fn append_corpus(&self, rows: &[CorpusRow]) -> Result<()> {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, rows)?;
        let mut f = OpenOptions::new().append(true).open(self.corpus_path())?;
        f.write_all(&buf)?;
        f.sync_data()?;
        Ok(())
    }

    pub fn load_audit(&self) -> Result<Vec<AuditEntry>> {
        let reader = BufReader::new(File::open(self.audit_path())?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: AuditEntry = serde_json::from_str(&line)
                .map_err(|e| ServiceError::Store(format!("audit.jsonl line {}: {e}", i + 1)))?;
            out.push(entry);
        }
        Ok(out)
    }

    pub fn append_audit(&self, entry: &AuditEntry) -> Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        let mut f = OpenOptions::new().append(true).open(self.audit_path())?;
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }

    pub fn load_manifest(&self) -> Result<Manifest> {
        let m: Manifest = serde_json::from_slice(&std::fs::read(self.state_path())?)?;
        if m.version != STATE_VERSION {
            return Err(ServiceError::Store(format!("unsupported state version {}", m.version)));
        }
        Ok(m)
    }

    pub fn save_manifest(&self, manifest: &Manifest) -> Result<()> {
        write_atomic(&self.state_path(), &serde_json::to_vec_pretty(manifest)?)
    }

    pub fn save_bundle(&self, bundle: &ModelBundle) -> Result<String> {
        let name = format!("round-{:04}.json", bundle.round);
        write_atomic(&self.checkpoint_dir().join(&name), &serde_json::to_vec(bundle)?)?;
        Ok(name)
    }

    pub fn load_bundle(&self, name: &str) -> Result<ModelBundle> {
        let bytes = std::fs::read(self.checkpoint_dir().join(name))?;
        let b: ModelBundle = serde_json::from_slice(&bytes)?;
        if b.format != BUNDLE_FORMAT {
            return Err(ServiceError::Store(format!("{name}: unexpected format {:?}", b.format)));
        }
        // re-validate the nested checkpoints
        Checkpoint::from_json(&b.aspect.to_json()?)?;
        Checkpoint::from_json(&b.sentiment.to_json()?)?;
        Ok(b)
    }
}
