use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{sample_backward, ModelParams};
use super::optim::{clip_global_norm, Adam};
use super::{forward, Hyperparams, LabelVector, PredictionVector};
use crate::embeddings::{EmbeddingTable, TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

// Decorrelates the shuffling stream from the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5bd1_e995;

/// A labeled sample with tokens already mapped to vocabulary indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub tokens: Vec<usize>,
    pub label: LabelVector,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ModelParams,
    /// Mean of the mini-batch losses seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

fn embed(params: &ModelParams, table: &EmbeddingTable, tokens: &[usize]) -> Matrix {
    match &params.embedding {
        Some(trainable) => {
            let mut out = Matrix::zeros(tokens.len(), trainable.cols());
            for (t, &ix) in tokens.iter().enumerate() {
                out.row_mut(t).copy_from_slice(trainable.row(ix));
            }
            out
        }
        None => table.gather(tokens),
    }
}

/// Class probabilities for an encoded sequence.
pub fn predict(params: &ModelParams, table: &EmbeddingTable, tokens: &[usize]) -> Result<PredictionVector> {
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    forward(params, &embed(params, table, tokens))
}

fn batch_gradient(
    params: &ModelParams,
    table: &EmbeddingTable,
    batch: &[&EncodedSample],
) -> Result<(f64, ModelParams)> {
    let mut total = params.zeros_like();
    let mut loss = 0.0;
    for sample in batch {
        let x = embed(params, table, &sample.tokens);
        let sg = sample_backward(params, &x, &sample.label)?;
        loss += sg.loss;
        for (tensor, grad) in total.layers.iter_mut().zip(&sg.grads.layers) {
            for (a, b) in tensor.weights.as_mut_slice().iter_mut().zip(grad.weights.as_slice()) {
                *a += b;
            }
            for (a, b) in tensor.bias.iter_mut().zip(&grad.bias) {
                *a += b;
            }
        }
        for (a, b) in total.head_weights.as_mut_slice().iter_mut().zip(sg.grads.head_weights.as_slice()) {
            *a += b;
        }
        for (a, b) in total.head_bias.iter_mut().zip(&sg.grads.head_bias) {
            *a += b;
        }
        if let Some(emb) = &mut total.embedding {
            for (t, &ix) in sample.tokens.iter().enumerate() {
                for (a, b) in emb.row_mut(ix).iter_mut().zip(sg.d_input.row(t)) {
                    *a += b;
                }
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    total.scale(inv);
    Ok((loss * inv, total))
}

/// Trains a fresh, seeded model with mini-batch Adam.
///
/// A trainable `table` is copied into the model and updated jointly; a frozen
/// table is only read.
pub fn train_encoded(samples: &[EncodedSample], hyper: &Hyperparams, table: &EmbeddingTable) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::EmptyPool);
    }
    hyper.validate()?;
    let classes = samples[0].label.len();
    if classes == 0 || samples.iter().any(|s| s.label.len() != classes) {
        return Err(Error::Shape("inconsistent label lengths in training set".into()));
    }
    if samples.iter().any(|s| s.tokens.is_empty()) {
        return Err(Error::EmptySequence);
    }
    if samples.iter().flat_map(|s| &s.tokens).any(|&ix| ix >= table.len()) {
        return Err(Error::Shape("token index outside the embedding table".into()));
    }

    let trainable = (!table.is_frozen()).then(|| table.matrix.clone());
    let mut params = ModelParams::init(table.dim(), hyper.hidden, classes, trainable, hyper.seed);
    let mut adam = Adam::new(&params, hyper);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<&EncodedSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (loss, mut grads) = batch_gradient(&params, table, &batch)?;
            clip_global_norm(&mut grads, hyper.clip_norm);
            adam.step(&mut params, &grads);
            sum += loss;
            batches += 1;
        }
        if !params.is_finite() {
            return Err(Error::Numeric("parameters diverged".into()));
        }
        epoch_losses.push(sum / batches as f64);
    }
    Ok(TrainReport { params, epoch_losses })
}

/// Trains on tokenized samples, encoding them with `vocab`.
pub fn train(
    pool_labeled: &[(TokenSequence, LabelVector)],
    hyper: &Hyperparams,
    table: &EmbeddingTable,
    vocab: &Vocabulary,
) -> Result<ModelParams> {
    let samples: Vec<EncodedSample> = pool_labeled
        .iter()
        .map(|(seq, label)| EncodedSample { tokens: vocab.encode(seq), label: label.clone() })
        .collect();
    Ok(train_encoded(&samples, hyper, table)?.params)
}
