use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusRow, Split};
use crate::embeddings::{TokenSequence, Tokenizer};
use crate::error::{Error, Result};
use crate::seqmodel::LabelVector;
use crate::taxonomy::{Task, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub aspects: LabelVector,
    pub sentiment: LabelVector,
}

impl Labels {
    pub fn get(&self, task: Task) -> &LabelVector {
        match task {
            Task::Aspect => &self.aspects,
            Task::Sentiment => &self.sentiment,
        }
    }

    /// Encodes class-name lists; a missing list means no class set.
    pub fn from_names(taxonomy: &Taxonomy, aspects: &[String], sentiment: &[String]) -> Result<Self> {
        Ok(Self {
            aspects: LabelVector::new(taxonomy.encode(Task::Aspect, aspects)?)?,
            sentiment: LabelVector::new(taxonomy.encode(Task::Sentiment, sentiment)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub tokens: TokenSequence,
    pub labels: Labels,
}

/// Labeled, unlabeled, pending and validation partitions of a corpus.
///
/// Ids are unique across all partitions. Validation documents are never
/// selected or trained on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub labeled: BTreeMap<String, LabeledDoc>,
    pub unlabeled: BTreeMap<String, TokenSequence>,
    /// Selected in live mode and waiting for a human label.
    pub pending: BTreeMap<String, TokenSequence>,
    pub validation: BTreeMap<String, LabeledDoc>,
    /// Gold labels revealed on selection; simulate mode only.
    pub hidden_oracle: Option<BTreeMap<String, Labels>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolCounts {
    pub labeled: usize,
    pub unlabeled: usize,
    pub pending: usize,
    pub validation: usize,
}

impl Pool {
    pub fn counts(&self) -> PoolCounts {
        PoolCounts {
            labeled: self.labeled.len(),
            unlabeled: self.unlabeled.len(),
            pending: self.pending.len(),
            validation: self.validation.len(),
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.labeled.contains_key(id)
            || self.unlabeled.contains_key(id)
            || self.pending.contains_key(id)
            || self.validation.contains_key(id)
    }

    /// Adds corpus rows: labeled rows go to `labeled` (or `validation` for
    /// the validation split), unlabeled rows to `unlabeled`.
    pub fn ingest(&mut self, rows: &[CorpusRow], taxonomy: &Taxonomy, tokenizer: &Tokenizer) -> Result<PoolCounts> {
        let before = self.counts();
        let mut staged = Pool::default();
        let mut ids = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            let line = i + 1;
            if self.contains(&row.id) || !ids.insert(row.id.as_str()) {
                return Err(Error::Ingest { line, msg: format!("duplicate id {:?}", row.id) });
            }
            let tokens = tokenizer
                .tokenize(&row.id, &row.text)
                .map_err(|e| Error::Ingest { line, msg: e.to_string() })?;
            if row.is_labeled() {
                let labels = Labels::from_names(
                    taxonomy,
                    row.aspects.as_deref().unwrap_or_default(),
                    row.sentiment.as_deref().unwrap_or_default(),
                )?;
                let doc = LabeledDoc { tokens, labels };
                match row.split() {
                    Split::Train => staged.labeled.insert(row.id.clone(), doc),
                    Split::Validation => staged.validation.insert(row.id.clone(), doc),
                };
            } else if row.split() == Split::Validation {
                return Err(Error::Ingest { line, msg: "validation rows need labels".into() });
            } else {
                staged.unlabeled.insert(row.id.clone(), tokens);
            }
        }
        self.labeled.append(&mut staged.labeled);
        self.unlabeled.append(&mut staged.unlabeled);
        self.validation.append(&mut staged.validation);
        let after = self.counts();
        Ok(PoolCounts {
            labeled: after.labeled - before.labeled,
            unlabeled: after.unlabeled - before.unlabeled,
            pending: 0,
            validation: after.validation - before.validation,
        })
    }

    /// Builds a simulation pool: every training row starts unlabeled with its
    /// gold labels hidden in the oracle.
    pub fn simulated(rows: &[CorpusRow], taxonomy: &Taxonomy, tokenizer: &Tokenizer) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut pool = Pool { hidden_oracle: Some(BTreeMap::new()), ..Pool::default() };
        for (i, row) in rows.iter().enumerate() {
            if !seen.insert(row.id.as_str()) {
                return Err(Error::Config(format!("id {:?} appears more than once (validation overlap)", row.id)));
            }
            if !row.is_labeled() {
                return Err(Error::Config(format!("row {} ({:?}) has no labels; simulation needs gold labels", i + 1, row.id)));
            }
            let tokens = tokenizer
                .tokenize(&row.id, &row.text)
                .map_err(|e| Error::Ingest { line: i + 1, msg: e.to_string() })?;
            let labels = Labels::from_names(
                taxonomy,
                row.aspects.as_deref().unwrap_or_default(),
                row.sentiment.as_deref().unwrap_or_default(),
            )?;
            match row.split() {
                Split::Validation => {
                    pool.validation.insert(row.id.clone(), LabeledDoc { tokens, labels });
                }
                Split::Train => {
                    pool.unlabeled.insert(row.id.clone(), tokens);
                    pool.hidden_oracle.as_mut().expect("set above").insert(row.id.clone(), labels);
                }
            }
        }
        Ok(pool)
    }

    /// Moves an unlabeled or pending document into the labeled set.
    pub fn label(&mut self, id: &str, labels: Labels) -> Result<()> {
        let tokens = self
            .unlabeled
            .remove(id)
            .or_else(|| self.pending.remove(id))
            .ok_or_else(|| Error::Config(format!("document {id:?} is not unlabeled or pending")))?;
        self.labeled.insert(id.to_string(), LabeledDoc { tokens, labels });
        Ok(())
    }

    /// Reveals the oracle label of an unlabeled document and labels it.
    pub fn reveal(&mut self, id: &str) -> Result<()> {
        let labels = self
            .hidden_oracle
            .as_ref()
            .and_then(|o| o.get(id))
            .cloned()
            .ok_or_else(|| Error::Config(format!("no oracle label for {id:?}")))?;
        self.label(id, labels)
    }

    pub fn mark_pending(&mut self, id: &str) -> Result<()> {
        let tokens = self
            .unlabeled
            .remove(id)
            .ok_or_else(|| Error::Config(format!("document {id:?} is not unlabeled")))?;
        self.pending.insert(id.to_string(), tokens);
        Ok(())
    }

    /// Verifies that no id appears in two partitions.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let all = self
            .labeled
            .keys()
            .chain(self.unlabeled.keys())
            .chain(self.pending.keys())
            .chain(self.validation.keys());
        for id in all {
            if !seen.insert(id) {
                return Err(Error::Config(format!("id {id:?} is in more than one partition")));
            }
        }
        Ok(())
    }

    pub fn labeled_docs(&self) -> impl Iterator<Item = &LabeledDoc> {
        self.labeled.values()
    }

    /// Every non-validation token sequence, in id order.
    pub fn training_texts(&self) -> Vec<&TokenSequence> {
        let mut all: Vec<(&String, &TokenSequence)> = self
            .labeled
            .iter()
            .map(|(k, d)| (k, &d.tokens))
            .chain(self.unlabeled.iter())
            .chain(self.pending.iter())
            .collect();
        all.sort_by(|a, b| a.0.cmp(b.0));
        all.into_iter().map(|(_, t)| t).collect()
    }
}
