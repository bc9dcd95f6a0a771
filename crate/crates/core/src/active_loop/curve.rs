//! Learning curves and their CSV form.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::round::Round;
use crate::error::Result;
use crate::taxonomy::Task;

pub const CSV_HEADER: &str = "setting,task,seed,round,labeled_count,micro_precision,micro_recall,micro_f1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSeed {
    Seed(u64),
    /// Average over the seeds of a setting.
    Mean,
}

impl fmt::Display for CurveSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSeed::Seed(s) => write!(f, "{s}"),
            CurveSeed::Mean => f.write_str("mean"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub labeled_count: usize,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub setting: String,
    pub seed: CurveSeed,
    pub tasks: BTreeMap<Task, Vec<CurvePoint>>,
}

impl LearningCurve {
    pub fn from_rounds(setting: &str, seed: CurveSeed, rounds: &[Round]) -> Self {
        let mut tasks: BTreeMap<Task, Vec<CurvePoint>> = BTreeMap::new();
        for r in rounds {
            for (task, e) in &r.eval {
                tasks.entry(*task).or_default().push(CurvePoint {
                    round: r.index,
                    labeled_count: r.trained_on,
                    micro_precision: e.micro_precision,
                    micro_recall: e.micro_recall,
                    micro_f1: e.micro_f1,
                });
            }
        }
        Self { setting: setting.to_string(), seed, tasks }
    }

    pub fn points(&self, task: Task) -> &[CurvePoint] {
        self.tasks.get(&task).map(Vec::as_slice).unwrap_or_default()
    }

    /// Pointwise mean of curves that share their rounds and labeled counts.
    pub fn mean(setting: &str, curves: &[&LearningCurve]) -> Self {
        let mut tasks = BTreeMap::new();
        if let Some(first) = curves.first() {
            let n = curves.len() as f64;
            for (task, pts) in &first.tasks {
                let mean_pts = pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let avg = |f: fn(&CurvePoint) -> f64| curves.iter().map(|c| f(&c.points(*task)[i])).sum::<f64>() / n;
                        CurvePoint {
                            round: p.round,
                            labeled_count: p.labeled_count,
                            micro_precision: avg(|q| q.micro_precision),
                            micro_recall: avg(|q| q.micro_recall),
                            micro_f1: avg(|q| q.micro_f1),
                        }
                    })
                    .collect();
                tasks.insert(*task, mean_pts);
            }
        }
        Self { setting: setting.to_string(), seed: CurveSeed::Mean, tasks }
    }

    /// Smallest labeled count at which `task` reaches `f1`.
    pub fn budget_to_reach(&self, task: Task, f1: f64) -> Option<usize> {
        self.points(task).iter().find(|p| p.micro_f1 >= f1).map(|p| p.labeled_count)
    }
}

type CsvRow = (String, Task, CurveSeed, CurvePoint);

pub fn write_curves_csv<W: Write>(mut w: W, curves: &[LearningCurve]) -> Result<()> {
    w.write_all(curves_to_csv(curves)?.as_bytes())?;
    Ok(())
}

/// CSV rows ordered by setting (first-seen order), task, seed (numeric
/// seeds before the mean) and round.
pub fn curves_to_csv(curves: &[LearningCurve]) -> Result<String> {
    let mut rows: Vec<CsvRow> = Vec::new();
    for c in curves {
        for (task, pts) in &c.tasks {
            for p in pts {
                rows.push((c.setting.clone(), *task, c.seed, *p));
            }
        }
    }
    let setting_rank: BTreeMap<&str, usize> = {
        let mut m = BTreeMap::new();
        for c in curves {
            let next = m.len();
            m.entry(c.setting.as_str()).or_insert(next);
        }
        m
    };
    let mut indexed: Vec<(usize, &CsvRow)> =
        rows.iter().map(|r| (setting_rank[r.0.as_str()], r)).collect();
    indexed.sort_by(|a, b| {
        (a.0, a.1 .1, a.1 .2, a.1 .3.round).cmp(&(b.0, b.1 .1, b.1 .2, b.1 .3.round))
    });
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (_, (setting, task, seed, p)) in indexed {
        out.push_str(&format!(
            "{setting},{task},{seed},{},{},{:.6},{:.6},{:.6}\n",
            p.round, p.labeled_count, p.micro_precision, p.micro_recall, p.micro_f1
        ));
    }
    Ok(out)
}
