//! The state owner: one writer for the pool, immutable model snapshots for
//! readers, and at most one retrain job at a time.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use alreview_core::active_loop::{
    curves_to_csv, evaluate_models, random_sample, top_k_uncertain, train_task_models, uncertainty_score, CurveSeed,
    Labels, LearningCurve, Pool, PoolCounts, Round, RoundContext, TaskModels,
};
use alreview_core::corpus::{read_jsonl, CorpusRow};
use alreview_core::embeddings::{load_pretrained, EmbeddingTable, TokenSequence, Tokenizer, Vocabulary};
use alreview_core::metrics::EvalReport;
use alreview_core::seqmodel::{predict, Checkpoint};
use alreview_core::taxonomy::Task;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{EmbeddingSource, ServiceConfig};
use crate::error::{Result, ServiceError};
use crate::store::{AuditEntry, Lease, Manifest, ModelBundle, Store, BUNDLE_FORMAT};

/// Curve label used for the live pool.
pub const LIVE_SETTING: &str = "live";

/// Seconds since the Unix epoch; injectable so leases can be tested.
pub trait Clock: Send + Sync {
    fn now(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub id: String,
    pub text: String,
    /// Hints from the current models; absent before the first retrain.
    pub aspect_predictions: Option<Vec<f64>>,
    pub sentiment_predictions: Option<Vec<f64>>,
    pub uncertainty: Option<f64>,
    pub queued_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBatch {
    pub tasks: Vec<AnnotationTask>,
    /// True when no model exists yet and tasks come in seeded random order.
    pub fallback_random: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitAck {
    pub id: String,
    pub labeled: usize,
    pub audit_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Idle,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStatus {
    pub state: JobState,
    pub job: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub error: Option<String>,
    pub rounds_completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub round: usize,
    pub trained_on: usize,
    pub tasks: BTreeMap<Task, EvalReport>,
    pub pool: PoolCounts,
}

#[derive(Debug, Clone)]
struct Ranked {
    id: String,
    score: f64,
    aspect: Vec<f64>,
    sentiment: Vec<f64>,
}

/// Immutable view published after each retrain. Readers clone the `Arc`
/// once per request, so they see either the old or the new scores.
#[derive(Default)]
struct Snapshot {
    bundle: Option<Arc<ModelBundle>>,
    /// Every unlabeled or pending document, most uncertain first.
    ranking: Vec<Ranked>,
}

struct Inner {
    config: ServiceConfig,
    store: Store,
    pool: Pool,
    texts: BTreeMap<String, String>,
    manifest: Manifest,
    audit_seq: u64,
    since_retrain: usize,
}

pub struct ServiceState {
    inner: Mutex<Inner>,
    snapshot: RwLock<Arc<Snapshot>>,
    job: Mutex<TrainStatus>,
    job_done: Condvar,
    clock: Arc<dyn Clock>,
}

fn score_docs(bundle: &ModelBundle, driver: Task, docs: &[(&String, &TokenSequence)], config: &ServiceConfig) -> Result<Vec<Ranked>> {
    let scored = config.exec.map(docs, |(id, seq)| -> Result<Ranked> {
        let tokens = bundle.vocab.encode(seq);
        let aspect = predict(&bundle.aspect.params, &bundle.table, &tokens)?;
        let sentiment = predict(&bundle.sentiment.params, &bundle.table, &tokens)?;
        let score = uncertainty_score(if driver == Task::Aspect { &aspect } else { &sentiment });
        Ok(Ranked { id: (*id).clone(), score, aspect: aspect.values().to_vec(), sentiment: sentiment.values().to_vec() })
    });
    scored.into_iter().collect()
}

fn sort_ranking(ranked: Vec<Ranked>) -> Vec<Ranked> {
    let order = top_k_uncertain(ranked.iter().map(|r| (r.id.clone(), r.score)).collect(), ranked.len());
    let mut by_id: BTreeMap<String, Ranked> = ranked.into_iter().map(|r| (r.id.clone(), r)).collect();
    order.into_iter().filter_map(|id| by_id.remove(&id)).collect()
}

fn open_docs(pool: &Pool) -> Vec<(&String, &TokenSequence)> {
    let mut docs: Vec<_> = pool.unlabeled.iter().chain(pool.pending.iter()).collect();
    docs.sort_by(|a, b| a.0.cmp(b.0));
    docs
}

fn build_snapshot(bundle: Option<ModelBundle>, pool: &Pool, config: &ServiceConfig) -> Result<Snapshot> {
    match bundle {
        None => Ok(Snapshot::default()),
        Some(b) => {
            let ranking = sort_ranking(score_docs(&b, config.driver_task, &open_docs(pool), config)?);
            Ok(Snapshot { bundle: Some(Arc::new(b)), ranking })
        }
    }
}

impl Inner {
    fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(self.config.max_seq_len)
    }

    /// Returns leases that ran out to the unlabeled pool.
    fn expire_leases(&mut self, now: u64) -> bool {
        let expired: Vec<String> =
            self.manifest.leases.iter().filter(|(_, l)| l.expires_at <= now).map(|(id, _)| id.clone()).collect();
        for id in &expired {
            self.manifest.leases.remove(id);
            if let Some(seq) = self.pool.pending.remove(id) {
                self.pool.unlabeled.insert(id.clone(), seq);
            }
        }
        !expired.is_empty()
    }
}

impl ServiceState {
    /// Loads a store: replays the audit log over the ingested corpus,
    /// restores leases and rescoring from the current bundle.
    pub fn open(store: Store) -> Result<Arc<Self>> {
        Self::open_with_clock(store, Arc::new(SystemClock))
    }

    pub fn open_with_clock(store: Store, clock: Arc<dyn Clock>) -> Result<Arc<Self>> {
        let config = store.load_config()?;
        let (mut pool, texts, audit_seq) = rebuild_pool(&store, &config)?;

        let mut manifest = store.load_manifest()?;
        manifest.leases.retain(|id, _| pool.unlabeled.contains_key(id));
        for id in manifest.leases.keys() {
            pool.mark_pending(id)?;
        }
        let bundle = match &manifest.checkpoint {
            Some(name) => Some(store.load_bundle(name)?),
            None => None,
        };
        let snapshot = build_snapshot(bundle, &pool, &config)?;
        let rounds_completed = manifest.rounds.len();
        info!(
            "store {}: {} labeled, {} unlabeled, {} validation, {} rounds",
            store.root().display(),
            pool.labeled.len(),
            pool.unlabeled.len() + pool.pending.len(),
            pool.validation.len(),
            rounds_completed
        );
        Ok(Arc::new(ServiceState {
            inner: Mutex::new(Inner { config, store, pool, texts, manifest, audit_seq, since_retrain: 0 }),
            snapshot: RwLock::new(Arc::new(snapshot)),
            job: Mutex::new(TrainStatus {
                state: JobState::Idle,
                job: 0,
                started_at: None,
                finished_at: None,
                error: None,
                rounds_completed,
            }),
            job_done: Condvar::new(),
            clock,
        }))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn config(&self) -> ServiceConfig {
        self.lock().config.clone()
    }

    pub fn counts(&self) -> PoolCounts {
        self.lock().pool.counts()
    }

    /// Labeled documents and their labels, for audit checks.
    pub fn labeled(&self) -> BTreeMap<String, Labels> {
        self.lock().pool.labeled.iter().map(|(id, d)| (id.clone(), d.labels.clone())).collect()
    }

    pub fn ingest_reader<R: BufRead>(&self, reader: R) -> Result<PoolCounts> {
        self.ingest_rows(&read_jsonl(reader)?)
    }

    pub fn ingest_path(&self, path: &Path) -> Result<PoolCounts> {
        self.ingest_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Adds rows to the pool and the store; nothing changes on error.
    pub fn ingest_rows(&self, rows: &[CorpusRow]) -> Result<PoolCounts> {
        let mut inner = self.lock();
        let mut pool = inner.pool.clone();
        let delta = pool.ingest(rows, &inner.config.taxonomy, &inner.tokenizer())?;
        inner.store.append_corpus(rows)?;
        let new_open: Vec<&CorpusRow> = rows.iter().filter(|r| pool.unlabeled.contains_key(&r.id)).collect();
        let snap = self.current();
        if let Some(bundle) = &snap.bundle {
            // score only the new documents with the current models
            let docs: Vec<(&String, &TokenSequence)> = new_open.iter().map(|r| (&r.id, &pool.unlabeled[&r.id])).collect();
            let mut ranking = snap.ranking.clone();
            ranking.extend(score_docs(bundle, inner.config.driver_task, &docs, &inner.config)?);
            let next = Snapshot { bundle: Some(bundle.clone()), ranking: sort_ranking(ranking) };
            *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        }
        for r in rows {
            inner.texts.insert(r.id.clone(), r.text.clone());
        }
        inner.pool = pool;
        info!("ingested {} rows: {delta:?}", rows.len());
        Ok(delta)
    }

    /// Up to `n` open documents for `annotator`, most uncertain first,
    /// skipping documents leased to someone else. Returned documents are
    /// leased to `annotator`; repeating the call returns the same ids.
    pub fn queue_next(&self, n: usize, annotator: &str) -> Result<TaskBatch> {
        if n == 0 {
            return Err(ServiceError::BadRequest("n must be at least 1".into()));
        }
        let now = self.clock.now();
        let snap = self.current();
        let mut inner = self.lock();
        let mut dirty = inner.expire_leases(now);
        if inner.pool.unlabeled.is_empty() && inner.pool.pending.is_empty() {
            return Err(ServiceError::PoolExhausted);
        }

        let fallback = snap.bundle.is_none();
        let order: Vec<String> = if fallback {
            let ids: Vec<&str> = open_docs(&inner.pool).into_iter().map(|(id, _)| id.as_str()).collect();
            random_sample(&ids, ids.len(), inner.config.hyper.seed, inner.manifest.rounds.len())
        } else {
            snap.ranking.iter().map(|r| r.id.clone()).collect()
        };
        let ranked: BTreeMap<&str, &Ranked> = snap.ranking.iter().map(|r| (r.id.as_str(), r)).collect();

        let lease_secs = inner.config.lease_secs;
        let mut tasks = Vec::with_capacity(n);
        for id in order {
            if tasks.len() == n {
                break;
            }
            let open = inner.pool.unlabeled.contains_key(&id) || inner.pool.pending.contains_key(&id);
            if !open {
                continue;
            }
            let queued_at = match inner.manifest.leases.get(&id) {
                Some(l) if l.annotator != annotator => continue,
                Some(l) => l.queued_at,
                None => {
                    inner.manifest.leases.insert(
                        id.clone(),
                        Lease { annotator: annotator.to_string(), queued_at: now, expires_at: now + lease_secs },
                    );
                    if let Some(seq) = inner.pool.unlabeled.remove(&id) {
                        inner.pool.pending.insert(id.clone(), seq);
                    }
                    dirty = true;
                    now
                }
            };
            let hint = ranked.get(id.as_str());
            tasks.push(AnnotationTask {
                text: inner.texts.get(&id).cloned().unwrap_or_default(),
                aspect_predictions: hint.map(|r| r.aspect.clone()),
                sentiment_predictions: hint.map(|r| r.sentiment.clone()),
                uncertainty: hint.map(|r| r.score),
                queued_at,
                id,
            });
        }
        if dirty {
            inner.store.save_manifest(&inner.manifest)?;
        }
        Ok(TaskBatch { tasks, fallback_random: fallback })
    }

    /// Records a human label. Any annotator may label an open document;
    /// labeling a labeled or validation document is a conflict.
    pub fn submit_labels(self: &Arc<Self>, id: &str, aspects: &[String], sentiment: &[String], annotator: &str) -> Result<SubmitAck> {
        let (ack, auto) = {
            let mut inner = self.lock();
            if inner.pool.labeled.contains_key(id) || inner.pool.validation.contains_key(id) {
                return Err(ServiceError::Conflict(id.to_string()));
            }
            if !inner.pool.unlabeled.contains_key(id) && !inner.pool.pending.contains_key(id) {
                return Err(ServiceError::NotFound(id.to_string()));
            }
            let labels = Labels::from_names(&inner.config.taxonomy, aspects, sentiment)?;
            let entry = AuditEntry {
                seq: inner.audit_seq + 1,
                id: id.to_string(),
                aspects: aspects.to_vec(),
                sentiment: sentiment.to_vec(),
                annotator: annotator.to_string(),
                at: self.clock.now(),
            };
            inner.store.append_audit(&entry)?;
            inner.audit_seq = entry.seq;
            inner.pool.label(id, labels)?;
            if inner.manifest.leases.remove(id).is_some() {
                inner.store.save_manifest(&inner.manifest)?;
            }
            inner.since_retrain += 1;
            let auto = inner.config.auto_retrain_every.is_some_and(|every| inner.since_retrain >= every);
            (SubmitAck { id: id.to_string(), labeled: inner.pool.labeled.len(), audit_seq: entry.seq }, auto)
        };
        if auto {
            match self.trigger_retrain() {
                Ok(_) | Err(ServiceError::Busy) => {}
                Err(e) => warn!("automatic retrain not started: {e}"),
            }
        }
        Ok(ack)
    }

    pub fn train_status(&self) -> TrainStatus {
        self.job.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Starts a background retrain on the current labeled pool.
    pub fn trigger_retrain(self: &Arc<Self>) -> Result<TrainStatus> {
        let mut job = self.job.lock().unwrap_or_else(|e| e.into_inner());
        if job.state == JobState::Running {
            return Err(ServiceError::Busy);
        }
        let (pool, config, root, index) = {
            let mut inner = self.lock();
            if inner.pool.labeled.is_empty() {
                return Err(ServiceError::EmptyPool);
            }
            inner.since_retrain = 0;
            (inner.pool.clone(), inner.config.clone(), inner.store.root().to_path_buf(), inner.manifest.rounds.len())
        };
        job.state = JobState::Running;
        job.job += 1;
        job.started_at = Some(self.clock.now());
        job.finished_at = None;
        job.error = None;
        let status = job.clone();
        drop(job);

        let this = Arc::clone(self);
        std::thread::spawn(move || {
            let outcome = train_round(&pool, &config, &root, index).and_then(|(round, bundle)| this.publish(round, bundle));
            let mut job = this.job.lock().unwrap_or_else(|e| e.into_inner());
            job.finished_at = Some(this.clock.now());
            match outcome {
                Ok(rounds) => {
                    job.state = JobState::Succeeded;
                    job.rounds_completed = rounds;
                }
                Err(e) => {
                    warn!("retrain {} failed: {e}", job.job);
                    job.state = JobState::Failed;
                    job.error = Some(e.to_string());
                }
            }
            this.job_done.notify_all();
        });
        Ok(status)
    }

    /// Blocks until no retrain is running and returns the final status.
    pub fn wait_for_training(&self) -> TrainStatus {
        let mut job = self.job.lock().unwrap_or_else(|e| e.into_inner());
        while job.state == JobState::Running {
            job = self.job_done.wait(job).unwrap_or_else(|e| e.into_inner());
        }
        job.clone()
    }

    /// Persists a finished round and swaps in the new snapshot.
    fn publish(&self, round: Round, bundle: ModelBundle) -> Result<usize> {
        let mut inner = self.lock();
        let name = inner.store.save_bundle(&bundle)?;
        let snapshot = build_snapshot(Some(bundle), &inner.pool, &inner.config)?;
        inner.manifest.rounds.push(round);
        inner.manifest.checkpoint = Some(name);
        inner.store.save_manifest(&inner.manifest)?;
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
        info!("round {} published", inner.manifest.rounds.len());
        Ok(inner.manifest.rounds.len())
    }

    pub fn rounds(&self) -> Vec<Round> {
        self.lock().manifest.rounds.clone()
    }

    pub fn get_metrics(&self) -> Result<MetricsReport> {
        let inner = self.lock();
        let last = inner.manifest.rounds.last().ok_or(ServiceError::NoRoundsYet)?;
        Ok(MetricsReport {
            round: last.index,
            trained_on: last.trained_on,
            tasks: last.eval.clone(),
            pool: inner.pool.counts(),
        })
    }

    pub fn get_curve(&self) -> Result<LearningCurve> {
        let inner = self.lock();
        if inner.manifest.rounds.is_empty() {
            return Err(ServiceError::NoRoundsYet);
        }
        Ok(LearningCurve::from_rounds(LIVE_SETTING, CurveSeed::Seed(inner.config.hyper.seed), &inner.manifest.rounds))
    }

    pub fn get_curve_csv(&self) -> Result<String> {
        Ok(curves_to_csv(&[self.get_curve()?])?)
    }

    /// Re-scores the current validation set with the current models.
    pub fn evaluate_current(&self) -> Result<BTreeMap<Task, EvalReport>> {
        let snap = self.current();
        let bundle = snap.bundle.as_ref().ok_or(ServiceError::NoRoundsYet)?;
        let inner = self.lock();
        let models = TaskModels { aspect: bundle.aspect.params.clone(), sentiment: bundle.sentiment.params.clone() };
        let ctx = RoundContext {
            vocab: &bundle.vocab,
            table: &bundle.table,
            hyper: &bundle.aspect.hyper,
            threshold: inner.config.threshold,
            force_top1: inner.config.force_top1,
            exec: inner.config.exec,
        };
        Ok(evaluate_models(&models, &inner.pool, &ctx)?)
    }
}

/// Cold-start training of both task models on `pool`.
fn train_round(pool: &Pool, config: &ServiceConfig, root: &Path, index: usize) -> Result<(Round, ModelBundle)> {
    let hyper = &config.hyper;
    let vocab = Vocabulary::build(pool.training_texts(), config.min_count)?;
    let table = match &config.embedding {
        EmbeddingSource::Pretrained { file } => load_pretrained(&root.join(file), &vocab, hyper.seed)?,
        EmbeddingSource::SelfTrained { dim } => EmbeddingTable::trainable(&vocab, *dim, hyper.seed)?,
    };
    let ctx = RoundContext {
        vocab: &vocab,
        table: &table,
        hyper,
        threshold: config.threshold,
        force_top1: config.force_top1,
        exec: config.exec,
    };
    let models = train_task_models(pool, &ctx)?;
    let eval = evaluate_models(&models, pool, &ctx)?;
    let trained_on = pool.labeled.len();
    let round = Round { index, trained_on, labeled_count_after: trained_on, selected_ids: Vec::new(), eval };
    let bundle = ModelBundle {
        format: BUNDLE_FORMAT.into(),
        round: index,
        vocab,
        table,
        aspect: Checkpoint::new(hyper.clone(), models.aspect),
        sentiment: Checkpoint::new(hyper.clone(), models.sentiment),
    };
    Ok((round, bundle))
}

/// Ingests the stored corpus into an empty pool and replays the audit log.
fn rebuild_pool(store: &Store, config: &ServiceConfig) -> Result<(Pool, BTreeMap<String, String>, u64)> {
    let rows = store.load_corpus()?;
    let mut pool = Pool::default();
    pool.ingest(&rows, &config.taxonomy, &Tokenizer::new(config.max_seq_len))?;
    let texts = rows.into_iter().map(|r| (r.id, r.text)).collect();
    let audit = store.load_audit()?;
    for e in &audit {
        let labels = Labels::from_names(&config.taxonomy, &e.aspects, &e.sentiment)?;
        pool.label(&e.id, labels)
            .map_err(|_| ServiceError::Store(format!("audit entry {} labels unknown or labeled id {:?}", e.seq, e.id)))?;
    }
    Ok((pool, texts, audit.last().map(|e| e.seq).unwrap_or(0)))
}

/// The labeled set obtained by replaying the audit log over the corpus.
pub fn replay_labeled(store: &Store) -> Result<BTreeMap<String, Labels>> {
    let (pool, _, _) = rebuild_pool(store, &store.load_config()?)?;
    Ok(pool.labeled.into_iter().map(|(id, d)| (id, d.labels)).collect())
}
