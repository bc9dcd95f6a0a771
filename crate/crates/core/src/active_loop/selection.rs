use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pool::Pool;
use crate::embeddings::{EmbeddingTable, TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::seqmodel::{predict, ModelParams, PredictionVector};
use crate::taxonomy::Task;

/// `1 - max_i p_i`: high when no class is predicted confidently.
pub fn uncertainty_score(pred: &PredictionVector) -> f64 {
    1.0 - pred.max()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Uncertainty,
    Random,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Uncertainty => "uncertainty",
            StrategyKind::Random => "random",
        }
    }

    /// The registered implementation for this kind.
    pub fn strategy(self) -> Box<dyn Strategy> {
        match self {
            StrategyKind::Uncertainty => Box::new(UncertaintySampling),
            StrategyKind::Random => Box::new(RandomSampling),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionStrategy {
    pub kind: StrategyKind,
    #[serde(default = "default_driver")]
    pub driver_task: Task,
    #[serde(default)]
    pub seed: u64,
}

fn default_driver() -> Task {
    Task::Aspect
}

/// Predicts with a trained model over an embedding table.
#[derive(Clone, Copy)]
pub struct ModelScorer<'a> {
    pub params: &'a ModelParams,
    pub table: &'a EmbeddingTable,
    pub vocab: &'a Vocabulary,
}

impl ModelScorer<'_> {
    pub fn predict(&self, seq: &TokenSequence) -> Result<PredictionVector> {
        predict(self.params, self.table, &self.vocab.encode(seq))
    }
}

/// Everything a strategy may look at when choosing documents.
pub struct SelectionContext<'a> {
    /// Unlabeled candidates in ascending id order.
    pub candidates: Vec<(&'a str, &'a TokenSequence)>,
    /// Model of the driver task; absent before the first training.
    pub scorer: Option<ModelScorer<'a>>,
    pub seed: u64,
    pub round: usize,
    pub exec: Exec,
}

/// A pool-based selection rule. Implement this to add strategies.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    /// Returns `min(k, candidates)` distinct candidate ids.
    fn select(&self, ctx: &SelectionContext<'_>, k: usize) -> Result<Vec<String>>;
}

pub struct UncertaintySampling;

impl Strategy for UncertaintySampling {
    fn name(&self) -> &str {
        "uncertainty"
    }

    fn select(&self, ctx: &SelectionContext<'_>, k: usize) -> Result<Vec<String>> {
        let scorer = ctx
            .scorer
            .ok_or_else(|| Error::Config("uncertainty selection needs a trained model".into()))?;
        let scores = ctx.exec.map(&ctx.candidates, |(_, seq)| scorer.predict(seq).map(|p| uncertainty_score(&p)));
        let scored = ctx
            .candidates
            .iter()
            .zip(scores)
            .map(|((id, _), s)| Ok((id.to_string(), s?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(top_k_uncertain(scored, k))
    }
}

pub struct RandomSampling;

impl Strategy for RandomSampling {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&self, ctx: &SelectionContext<'_>, k: usize) -> Result<Vec<String>> {
        let ids: Vec<&str> = ctx.candidates.iter().map(|(id, _)| *id).collect();
        Ok(random_sample(&ids, k, ctx.seed, ctx.round))
    }
}

/// Orders by descending score, ascending id on ties, and keeps `k`.
pub fn top_k_uncertain(mut scored: Vec<(String, f64)>, k: usize) -> Vec<String> {
    scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    scored.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Seeded uniform sample without replacement; the stream depends on both
/// `seed` and `round`.
pub fn random_sample(ids: &[&str], k: usize, seed: u64, round: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round as u64 + 1);
    let k = k.min(ids.len());
    rand::seq::index::sample(&mut rng, ids.len(), k)
        .into_iter()
        .map(|i| ids[i].to_string())
        .collect()
}

/// Chooses up to `k` unlabeled documents with `strategy`.
pub fn select_batch(
    strategy: &SelectionStrategy,
    scorer: Option<ModelScorer<'_>>,
    pool: &Pool,
    k: usize,
    round: usize,
    exec: Exec,
) -> Result<Vec<String>> {
    select_with(strategy.kind.strategy().as_ref(), strategy.seed, scorer, pool, k, round, exec)
}

/// Like [`select_batch`] with any [`Strategy`] implementation.
pub fn select_with(
    strategy: &dyn Strategy,
    seed: u64,
    scorer: Option<ModelScorer<'_>>,
    pool: &Pool,
    k: usize,
    round: usize,
    exec: Exec,
) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::Config("batch size k must be at least 1".into()));
    }
    if pool.unlabeled.is_empty() {
        return Err(Error::PoolExhausted);
    }
    let ctx = SelectionContext {
        candidates: pool.unlabeled.iter().map(|(id, seq)| (id.as_str(), seq)).collect(),
        scorer,
        seed,
        round,
        exec,
    };
    let chosen = strategy.select(&ctx, k)?;
    debug_assert!(chosen.len() == k.min(ctx.candidates.len()));
    Ok(chosen)
}
