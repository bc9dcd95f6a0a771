//! Multi-label binarization and micro-averaged precision / recall / F1.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqmodel::{LabelVector, PredictionVector};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// True/false positive and false negative counts summed over every class of
/// every sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTotals {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Add for ConfusionTotals {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }
}

impl AddAssign for ConfusionTotals {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub totals: ConfusionTotals,
    pub n_samples: usize,
}

/// Sets class `i` iff `pred[i] >= threshold`. With `force_top1`, an empty
/// result gets its argmax class instead (lowest index on ties).
pub fn binarize(pred: &PredictionVector, threshold: f64, force_top1: bool) -> LabelVector {
    let values = pred.values();
    let mut out: Vec<u8> = values.iter().map(|&p| u8::from(p >= threshold)).collect();
    if force_top1 && !out.contains(&1) && !values.is_empty() {
        let mut best = 0;
        for (i, &p) in values.iter().enumerate() {
            if p > values[best] {
                best = i;
            }
        }
        out[best] = 1;
    }
    LabelVector::new(out).expect("binary by construction")
}

fn count_pair(pred: &LabelVector, gold: &LabelVector) -> ConfusionTotals {
    let mut t = ConfusionTotals::default();
    for (&p, &g) in pred.values().iter().zip(gold.values()) {
        match (p, g) {
            (1, 1) => t.tp += 1,
            (1, 0) => t.fp += 1,
            (0, 1) => t.fn_ += 1,
            _ => {}
        }
    }
    t
}

pub fn accumulate(preds: &[LabelVector], golds: &[LabelVector]) -> Result<ConfusionTotals> {
    if preds.len() != golds.len() {
        return Err(Error::Shape(format!("{} predictions for {} gold labels", preds.len(), golds.len())));
    }
    let mut totals = ConfusionTotals::default();
    for (i, (p, g)) in preds.iter().zip(golds).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Shape(format!(
                "sample {i}: prediction has {} classes, gold has {}",
                p.len(),
                g.len()
            )));
        }
        totals += count_pair(p, g);
    }
    Ok(totals)
}

/// Micro scores from summed counts. A zero denominator makes precision (or
/// recall) 1; F1 is 0 when precision + recall is 0.
pub fn micro_scores(totals: &ConfusionTotals) -> EvalReport {
    micro_scores_n(totals, 0)
}

pub fn micro_scores_n(totals: &ConfusionTotals, n_samples: usize) -> EvalReport {
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let p = ratio(totals.tp, totals.tp + totals.fp);
    let r = ratio(totals.tp, totals.tp + totals.fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    EvalReport { micro_precision: p, micro_recall: r, micro_f1: f1, totals: *totals, n_samples }
}

/// Binarizes every prediction and scores it against the gold labels.
pub fn evaluate(preds: &[PredictionVector], golds: &[LabelVector], threshold: f64, force_top1: bool) -> Result<EvalReport> {
    let bin: Vec<LabelVector> = preds.iter().map(|p| binarize(p, threshold, force_top1)).collect();
    Ok(micro_scores_n(&accumulate(&bin, golds)?, golds.len()))
}
