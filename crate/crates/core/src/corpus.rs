//! JSONL corpus rows shared by the experiment runner and the service.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// One corpus line: `{"id", "text", "aspects"?, "sentiment"?, "split"?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRow {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspects: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl CorpusRow {
    pub fn is_labeled(&self) -> bool {
        self.aspects.is_some() || self.sentiment.is_some()
    }

    pub fn split(&self) -> Split {
        self.split.unwrap_or(Split::Train)
    }
}

/// Parses JSONL, rejecting malformed lines and duplicate ids with the
/// offending 1-based line number. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<CorpusRow>> {
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: CorpusRow = serde_json::from_str(&line)
            .map_err(|e| Error::Ingest { line: line_no, msg: e.to_string() })?;
        if row.id.is_empty() {
            return Err(Error::Ingest { line: line_no, msg: "empty id".into() });
        }
        if row.text.trim().is_empty() {
            return Err(Error::Ingest { line: line_no, msg: "empty text".into() });
        }
        if row.split == Some(Split::Validation) && !row.is_labeled() {
            return Err(Error::Ingest { line: line_no, msg: "validation rows need labels".into() });
        }
        if !seen.insert(row.id.clone()) {
            return Err(Error::Ingest { line: line_no, msg: format!("duplicate id {:?}", row.id) });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_jsonl<W: Write>(mut w: W, rows: &[CorpusRow]) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
