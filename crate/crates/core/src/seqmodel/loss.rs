use super::{LabelVector, PredictionVector};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

/// Summed binary cross-entropy over classes, negated so the loss is ≥ 0.
pub fn multi_label_loss(pred: &PredictionVector, label: &LabelVector) -> Result<f64> {
    if pred.len() != label.len() {
        return Err(Error::Shape(format!(
            "prediction has {} classes, label has {}",
            pred.len(),
            label.len()
        )));
    }
    Ok(bce_sum(pred.values(), label.values()))
}

pub(crate) fn bce_sum(pred: &[f64], label: &[u8]) -> f64 {
    pred.iter()
        .zip(label)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}
