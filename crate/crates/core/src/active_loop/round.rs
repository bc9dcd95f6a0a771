use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use super::pool::{LabeledDoc, Pool};
use super::selection::{select_batch, ModelScorer, SelectionStrategy};
use crate::embeddings::{EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::par::Exec;
use crate::seqmodel::{predict, train_encoded, EncodedSample, Hyperparams, ModelParams};
use crate::taxonomy::Task;

/// One trained model per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskModels {
    pub aspect: ModelParams,
    pub sentiment: ModelParams,
}

impl TaskModels {
    pub fn get(&self, task: Task) -> &ModelParams {
        match task {
            Task::Aspect => &self.aspect,
            Task::Sentiment => &self.sentiment,
        }
    }
}

/// How selected documents get their labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelingMode {
    /// Reveal the hidden gold labels immediately.
    Simulate,
    /// Move the selection to `pending` for a human.
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub index: usize,
    /// Labeled documents the evaluated models were trained on.
    pub trained_on: usize,
    pub labeled_count_after: usize,
    pub selected_ids: Vec<String>,
    pub eval: BTreeMap<Task, EvalReport>,
}

/// Shared inputs of every round of one arm.
pub struct RoundContext<'a> {
    pub vocab: &'a Vocabulary,
    pub table: &'a EmbeddingTable,
    pub hyper: &'a Hyperparams,
    pub threshold: f64,
    pub force_top1: bool,
    pub exec: Exec,
}

fn encode(vocab: &Vocabulary, docs: &[&LabeledDoc], task: Task) -> Vec<EncodedSample> {
    docs.iter()
        .map(|d| EncodedSample { tokens: vocab.encode(&d.tokens), label: d.labels.get(task).clone() })
        .collect()
}

/// Trains a cold-started model per task on the labeled set.
pub fn train_task_models(pool: &Pool, ctx: &RoundContext<'_>) -> Result<TaskModels> {
    if pool.labeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    let docs: Vec<&LabeledDoc> = pool.labeled.values().collect();
    let mut trained = ctx
        .exec
        .map(&Task::ALL, |&task| train_encoded(&encode(ctx.vocab, &docs, task), ctx.hyper, ctx.table))
        .into_iter();
    let aspect = trained.next().expect("two tasks")?.params;
    let sentiment = trained.next().expect("two tasks")?.params;
    Ok(TaskModels { aspect, sentiment })
}

/// Micro scores of each task model on the validation set.
pub fn evaluate_models(models: &TaskModels, pool: &Pool, ctx: &RoundContext<'_>) -> Result<BTreeMap<Task, EvalReport>> {
    let docs: Vec<&LabeledDoc> = pool.validation.values().collect();
    let encoded: Vec<Vec<usize>> = docs.iter().map(|d| ctx.vocab.encode(&d.tokens)).collect();
    let mut out = BTreeMap::new();
    for task in Task::ALL {
        let params = models.get(task);
        let preds = ctx
            .exec
            .map(&encoded, |tokens| predict(params, ctx.table, tokens))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let golds: Vec<_> = docs.iter().map(|d| d.labels.get(task).clone()).collect();
        out.insert(task, evaluate(&preds, &golds, ctx.threshold, ctx.force_top1)?);
    }
    Ok(out)
}

/// Train, evaluate, select `k` documents and hand them to the labeler.
pub fn run_round(
    pool: &mut Pool,
    strategy: &SelectionStrategy,
    ctx: &RoundContext<'_>,
    k: usize,
    index: usize,
    mode: LabelingMode,
) -> Result<(Round, TaskModels)> {
    if pool.labeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    if pool.unlabeled.is_empty() {
        return Err(Error::PoolExhausted);
    }
    let trained_on = pool.labeled.len();
    let models = train_task_models(pool, ctx)?;
    let eval = evaluate_models(&models, pool, ctx)?;

    let scorer = ModelScorer { params: models.get(strategy.driver_task), table: ctx.table, vocab: ctx.vocab };
    let selected_ids = select_batch(strategy, Some(scorer), pool, k, index, ctx.exec)?;
    for id in &selected_ids {
        match mode {
            LabelingMode::Simulate => pool.reveal(id)?,
            LabelingMode::Live => pool.mark_pending(id)?,
        }
    }
    debug!(
        "round {index}: trained on {trained_on}, aspect f1 {:.4}, selected {}",
        eval[&Task::Aspect].micro_f1,
        selected_ids.len()
    );
    let round = Round { index, trained_on, labeled_count_after: pool.labeled.len(), selected_ids, eval };
    Ok((round, models))
}
