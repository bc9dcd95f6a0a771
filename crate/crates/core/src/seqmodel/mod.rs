//! Two-layer LSTM multi-label classifier with a sigmoid head.
//!
//! The network reads a `T × D` embedded sequence, runs it through two stacked
//! LSTM layers, feeds the last hidden state of the top layer into a fully
//! connected layer and applies an elementwise sigmoid. Training minimizes the
//! summed per-class binary cross-entropy.

mod checkpoint;
mod gradcheck;
mod loss;
mod network;
mod optim;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport, FD_STEP};
pub use loss::{multi_label_loss, PROB_CLAMP};
pub use network::{backward, forward, Gradients, LstmLayer, ModelParams, NUM_LAYERS};
pub use optim::Adam;
pub use train::{predict, train, train_encoded, EncodedSample, TrainReport};

/// Binary per-class targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<u8>);

impl LabelVector {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if values.iter().any(|&v| v > 1) {
            return Err(Error::Shape("label entries must be 0 or 1".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn count_set(&self) -> usize {
        self.0.iter().filter(|&&v| v == 1).count()
    }
}

/// Per-class sigmoid outputs, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionVector(Vec<f64>);

impl PredictionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::Numeric("prediction outside (0, 1)".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Training hyperparameters. Every field can be overridden from config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            clip_norm: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden as f64),
            ("learning_rate", self.learning_rate),
            ("epochs", self.epochs as f64),
            ("batch_size", self.batch_size as f64),
            ("clip_norm", self.clip_norm),
            ("adam_eps", self.adam_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1)")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_vector_rejects_non_binary() {
        assert!(LabelVector::new(vec![0, 1, 2]).is_err());
        assert_eq!(LabelVector::new(vec![1, 0, 1]).unwrap().count_set(), 2);
    }

    #[test]
    fn prediction_vector_open_interval() {
        assert!(PredictionVector::new(vec![0.0]).is_err());
        assert!(PredictionVector::new(vec![1.0]).is_err());
        assert!(PredictionVector::new(vec![f64::NAN]).is_err());
        assert_eq!(PredictionVector::new(vec![0.2, 0.7]).unwrap().max(), 0.7);
    }

    #[test]
    fn default_hyperparams_validate() {
        Hyperparams::default().validate().unwrap();
        let bad = Hyperparams { batch_size: 0, ..Hyperparams::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hyperparams_reject_unknown_keys() {
        let err = serde_json::from_str::<Hyperparams>(r#"{"hiden": 3}"#);
        assert!(err.is_err());
        let h: Hyperparams = serde_json::from_str(r#"{"hidden": 3}"#).unwrap();
        assert_eq!(h.hidden, 3);
        assert_eq!(h.epochs, 30);
    }
}
