#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use alreview_core::active_loop::{generate_synthetic_corpus, SyntheticSpec};
use alreview_core::corpus::{write_jsonl, CorpusRow, Split};
use alreview_core::seqmodel::Hyperparams;
use alreview_service::{Clock, EmbeddingSource, ServiceConfig, ServiceState, Store};

pub struct FakeClock(pub AtomicU64);

impl Clock for FakeClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl FakeClock {
    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

pub fn config() -> ServiceConfig {
    ServiceConfig {
        hyper: Hyperparams { hidden: 4, epochs: 2, batch_size: 8, learning_rate: 0.02, seed: 3, ..Default::default() },
        embedding: EmbeddingSource::Pretrained { file: "embeddings.txt".into() },
        ..Default::default()
    }
}

/// 20 labeled training rows, 60 unlabeled rows and 20 validation rows.
pub fn rows() -> Vec<CorpusRow> {
    let c = generate_synthetic_corpus(&SyntheticSpec { n_samples: 100, validation_size: 20, seed: 9, ..Default::default() })
        .unwrap();
    c.rows
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            if r.split() == Split::Train && i >= 20 {
                r.aspects = None;
                r.sentiment = None;
                r.split = None;
            }
            r
        })
        .collect()
}

pub fn write_embeddings(dir: &Path) {
    let c = generate_synthetic_corpus(&SyntheticSpec { n_samples: 1, validation_size: 0, seed: 9, ..Default::default() })
        .unwrap();
    let mut buf = Vec::new();
    c.embeddings.write(&mut buf).unwrap();
    std::fs::write(dir.join("embeddings.txt"), buf).unwrap();
}

pub fn jsonl(rows: &[CorpusRow]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, rows).unwrap();
    String::from_utf8(buf).unwrap()
}

pub fn open(dir: &Path, clock: Arc<FakeClock>) -> Arc<ServiceState> {
    let store = Store::open_or_init(dir, Some(&config())).unwrap();
    ServiceState::open_with_clock(store, clock).unwrap()
}

/// A fresh store with the standard rows ingested.
pub fn seeded(dir: &Path) -> (Arc<ServiceState>, Arc<FakeClock>) {
    write_embeddings(dir);
    let clock = Arc::new(FakeClock(AtomicU64::new(1_000)));
    let state = open(dir, clock.clone());
    state.ingest_rows(&rows()).unwrap();
    (state, clock)
}
