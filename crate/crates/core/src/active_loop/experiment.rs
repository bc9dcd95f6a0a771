//! Simulated-oracle benchmark comparing embedding and selection settings.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curve::{CurveSeed, LearningCurve};
use super::pool::Pool;
use super::round::{run_round, LabelingMode, RoundContext};
use super::selection::{SelectionStrategy, StrategyKind};
use crate::corpus::CorpusRow;
use crate::embeddings::{EmbeddingTable, PretrainedVectors, Tokenizer, Vocabulary, DEFAULT_MAX_SEQ_LEN};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::par::Exec;
use crate::seqmodel::Hyperparams;
use crate::taxonomy::{Task, Taxonomy};

/// Dimension of self-trained tables when no pretrained file fixes it.
pub const DEFAULT_SELF_TRAINED_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// Randomly initialized table learned with the classifier.
    SelfTrained,
    /// Frozen vectors from the pretrained file.
    Pretrained,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingSpec {
    pub name: String,
    pub embedding: EmbeddingKind,
    pub strategy: StrategyKind,
}

impl SettingSpec {
    pub fn new(embedding: EmbeddingKind, strategy: StrategyKind) -> Self {
        let e = match embedding {
            EmbeddingKind::SelfTrained => "self_trained",
            EmbeddingKind::Pretrained => "pretrained",
        };
        Self { name: format!("{e}_{}", strategy.name()), embedding, strategy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub settings: Vec<SettingSpec>,
    pub seeds: Vec<u64>,
    pub init_size: usize,
    pub k: usize,
    pub rounds: usize,
    pub driver_task: Task,
    pub hyper: Hyperparams,
    /// Dimension of self-trained tables; defaults to the pretrained dimension.
    pub embedding_dim: Option<usize>,
    pub threshold: f64,
    pub force_top1: bool,
    pub max_seq_len: usize,
    pub min_count: usize,
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            settings: vec![
                SettingSpec::new(EmbeddingKind::SelfTrained, StrategyKind::Random),
                SettingSpec::new(EmbeddingKind::Pretrained, StrategyKind::Random),
                SettingSpec::new(EmbeddingKind::Pretrained, StrategyKind::Uncertainty),
            ],
            seeds: vec![1, 2, 3],
            init_size: 50,
            k: 50,
            rounds: 20,
            driver_task: Task::Aspect,
            hyper: Hyperparams::default(),
            embedding_dim: None,
            threshold: DEFAULT_THRESHOLD,
            force_top1: false,
            max_seq_len: DEFAULT_MAX_SEQ_LEN,
            min_count: 1,
            exec: Exec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("at least one setting and one seed are required".into()));
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.settings {
            if s.name.is_empty() || s.name.contains([',', '\n', '"']) || !names.insert(&s.name) {
                return Err(Error::Config(format!("bad or duplicate setting name {:?}", s.name)));
            }
        }
        if self.init_size == 0 || self.k == 0 || self.rounds == 0 || self.max_seq_len == 0 {
            return Err(Error::Config("init_size, k, rounds and max_seq_len must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must be in (0, 1)".into()));
        }
        self.hyper.validate()
    }
}

/// Inputs of a simulated run: fully labeled rows plus optional pretrained vectors.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub taxonomy: Taxonomy,
    pub rows: Vec<CorpusRow>,
    pub pretrained: Option<PretrainedVectors>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// For each setting: one curve per seed followed by the seed mean.
    pub curves: Vec<LearningCurve>,
}

impl ExperimentResult {
    pub fn mean_curve(&self, setting: &str) -> Option<&LearningCurve> {
        self.curves.iter().find(|c| c.setting == setting && c.seed == CurveSeed::Mean)
    }
}

/// Stratified initial draw: one document per aspect class when possible,
/// filled up uniformly at random.
pub fn initial_labeled_draw(pool: &Pool, size: usize, seed: u64) -> Result<Vec<String>> {
    let oracle = pool
        .hidden_oracle
        .as_ref()
        .ok_or_else(|| Error::Config("initial draw needs oracle labels".into()))?;
    let mut ids: Vec<&String> = pool.unlabeled.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let size = size.min(ids.len());
    let classes = oracle.values().next().map(|l| l.aspects.len()).unwrap_or(0);
    let mut chosen: Vec<String> = Vec::with_capacity(size);
    let mut taken = std::collections::HashSet::new();
    let mut covered = vec![false; classes];
    for c in 0..classes {
        if chosen.len() >= size {
            break;
        }
        if covered[c] {
            continue;
        }
        if let Some(id) = ids.iter().find(|id| !taken.contains(**id) && oracle[id.as_str()].aspects.is_set(c)) {
            for (j, cov) in covered.iter_mut().enumerate() {
                *cov |= oracle[id.as_str()].aspects.is_set(j);
            }
            taken.insert(*id);
            chosen.push((*id).clone());
        }
    }
    for id in &ids {
        if chosen.len() >= size {
            break;
        }
        if taken.insert(*id) {
            chosen.push((*id).clone());
        }
    }
    Ok(chosen)
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    base_pool: &'a Pool,
    vocab: &'a Vocabulary,
    pretrained: Option<&'a PretrainedVectors>,
    self_dim: usize,
}

fn run_arm(shared: &Shared<'_>, setting: &SettingSpec, seed: u64) -> Result<LearningCurve> {
    let config = shared.config;
    let table = match setting.embedding {
        EmbeddingKind::Pretrained => shared
            .pretrained
            .ok_or_else(|| Error::Config(format!("setting {} needs pretrained vectors", setting.name)))?
            .to_table(shared.vocab, seed),
        EmbeddingKind::SelfTrained => EmbeddingTable::trainable(shared.vocab, shared.self_dim, seed)?,
    };
    let hyper = Hyperparams { seed, ..config.hyper.clone() };
    let mut pool = shared.base_pool.clone();
    for id in initial_labeled_draw(&pool, config.init_size, seed)? {
        pool.reveal(&id)?;
    }
    let strategy = SelectionStrategy { kind: setting.strategy, driver_task: config.driver_task, seed };
    let ctx = RoundContext {
        vocab: shared.vocab,
        table: &table,
        hyper: &hyper,
        threshold: config.threshold,
        force_top1: config.force_top1,
        exec: config.exec,
    };
    let mut rounds = Vec::with_capacity(config.rounds);
    for r in 0..config.rounds {
        let (round, _) = run_round(&mut pool, &strategy, &ctx, config.k, r, LabelingMode::Simulate)?;
        rounds.push(round);
    }
    let curve = LearningCurve::from_rounds(&setting.name, CurveSeed::Seed(seed), &rounds);
    if let Some(last) = curve.points(config.driver_task).last() {
        info!(
            "{} seed {seed}: {} f1 {:.4} at {} labels",
            setting.name, config.driver_task, last.micro_f1, last.labeled_count
        );
    }
    Ok(curve)
}

/// Runs every (setting, seed) arm and appends a seed-mean curve per setting.
///
/// Arms with the same seed share the initial labeled draw and, for random
/// selection, the sequence of selected documents.
pub fn run_experiment(config: &ExperimentConfig, data: &ExperimentData) -> Result<ExperimentResult> {
    config.validate()?;
    data.taxonomy.validate()?;
    let tokenizer = Tokenizer::new(config.max_seq_len);
    let pool = Pool::simulated(&data.rows, &data.taxonomy, &tokenizer)?;
    if pool.validation.is_empty() {
        return Err(Error::Config("corpus has no validation rows".into()));
    }
    let needed = config.init_size + (config.rounds - 1) * config.k;
    if needed >= pool.unlabeled.len() {
        return Err(Error::Config(format!(
            "init_size + (rounds - 1) * k = {needed} leaves no unlabeled documents in a pool of {}",
            pool.unlabeled.len()
        )));
    }
    let needs_pretrained = config.settings.iter().any(|s| s.embedding == EmbeddingKind::Pretrained);
    if needs_pretrained && data.pretrained.is_none() {
        return Err(Error::Config("a pretrained setting is configured but no embedding file was given".into()));
    }
    let vocab = Vocabulary::build(pool.training_texts(), config.min_count)?;
    let self_dim = config
        .embedding_dim
        .or(data.pretrained.as_ref().map(|p| p.dim))
        .unwrap_or(DEFAULT_SELF_TRAINED_DIM);
    let shared = Shared { config, base_pool: &pool, vocab: &vocab, pretrained: data.pretrained.as_ref(), self_dim };

    let arms: Vec<(&SettingSpec, u64)> = config
        .settings
        .iter()
        .flat_map(|s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results = config.exec.map(&arms, |(setting, seed)| run_arm(&shared, setting, *seed));

    let mut per_arm = results.into_iter();
    let mut curves = Vec::with_capacity(arms.len() + config.settings.len());
    for setting in &config.settings {
        let seeds: Vec<LearningCurve> = (0..config.seeds.len())
            .map(|_| per_arm.next().expect("one result per arm"))
            .collect::<Result<_>>()?;
        let refs: Vec<&LearningCurve> = seeds.iter().collect();
        let mean = LearningCurve::mean(&setting.name, &refs);
        curves.extend(seeds);
        curves.push(mean);
    }
    Ok(ExperimentResult { curves })
}
