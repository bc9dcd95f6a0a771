use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::bce_sum;
use super::{LabelVector, PredictionVector};
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};

pub const NUM_LAYERS: usize = 2;

// Sigmoid outputs are kept strictly inside (0, 1).
const MIN_PROB: f64 = f64::MIN_POSITIVE;
const MAX_PROB: f64 = 1.0 - f64::EPSILON / 2.0;

/// One LSTM layer. `weights` is `4H × (input + H)` acting on `[x_t; h_{t-1}]`;
/// gate blocks are stacked in the order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LstmLayer {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self { weights: Matrix::zeros(4 * hidden, input + hidden), bias: vec![0.0; 4 * hidden] }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols() - self.hidden()
    }

    pub fn hidden(&self) -> usize {
        self.bias.len() / 4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Trainable embedding table; `None` when a frozen table supplies inputs.
    pub embedding: Option<Matrix>,
    pub layers: Vec<LstmLayer>,
    /// `C × H`
    pub head_weights: Matrix,
    pub head_bias: Vec<f64>,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

impl ModelParams {
    /// All-zero parameters for the given shape.
    pub fn zeros(input_dim: usize, hidden: usize, classes: usize, embedding_rows: Option<usize>) -> Self {
        let mut layers = Vec::with_capacity(NUM_LAYERS);
        layers.push(LstmLayer::zeros(input_dim, hidden));
        for _ in 1..NUM_LAYERS {
            layers.push(LstmLayer::zeros(hidden, hidden));
        }
        Self {
            embedding: embedding_rows.map(|r| Matrix::zeros(r, input_dim)),
            layers,
            head_weights: Matrix::zeros(classes, hidden),
            head_bias: vec![0.0; classes],
        }
    }

    /// Seeded initialization: weights uniform in `±1/√H`, forget-gate bias 1.
    pub fn init(input_dim: usize, hidden: usize, classes: usize, embedding: Option<Matrix>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(input_dim, hidden, classes, None);
        for layer in &mut p.layers {
            let (r, c) = layer.weights.shape();
            layer.weights = Matrix::uniform(r, c, bound, &mut rng);
            layer.bias[hidden..2 * hidden].fill(1.0);
        }
        p.head_weights = Matrix::uniform(classes, hidden, bound, &mut rng);
        p.embedding = embedding;
        p
    }

    /// Uniform `±scale` on every entry, biases included. Used for gradient checks.
    pub fn random(input_dim: usize, hidden: usize, classes: usize, scale: f64, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(input_dim, hidden, classes, None);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        for t in g.tensors_mut() {
            t.fill(0.0);
        }
        g
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden()
    }

    pub fn classes(&self) -> usize {
        self.head_bias.len()
    }

    /// Flat views of every parameter array, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 3);
        if let Some(e) = &self.embedding {
            out.push(e.as_slice());
        }
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(&l.bias);
        }
        out.push(self.head_weights.as_slice());
        out.push(&self.head_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 3);
        if let Some(e) = &mut self.embedding {
            out.push(e.as_mut_slice());
        }
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(&mut l.bias);
        }
        out.push(self.head_weights.as_mut_slice());
        out.push(&mut self.head_bias);
        out
    }

    /// Names matching [`ModelParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.embedding.is_some() {
            out.push("embedding".to_string());
        }
        for i in 0..self.layers.len() {
            out.push(format!("lstm{}.weights", i + 1));
            out.push(format!("lstm{}.bias", i + 1));
        }
        out.push("head.weights".into());
        out.push("head.bias".into());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }

    /// `self += other`; shapes must match.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Checks that every array has the shape implied by the layer sizes.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != NUM_LAYERS {
            return Err(Error::Shape(format!("expected {NUM_LAYERS} LSTM layers, found {}", self.layers.len())));
        }
        let h = self.hidden();
        if h == 0 {
            return Err(Error::Shape("hidden size must be positive".into()));
        }
        let mut input = self.input_dim();
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != 4 * h || l.weights.shape() != (4 * h, input + h) {
                return Err(Error::Shape(format!("lstm{} has inconsistent shape", i + 1)));
            }
            input = h;
        }
        if self.head_weights.shape() != (self.classes(), h) {
            return Err(Error::Shape("head weights inconsistent with hidden size".into()));
        }
        if let Some(e) = &self.embedding {
            if e.cols() != self.input_dim() {
                return Err(Error::Shape("embedding dimension differs from LSTM input".into()));
            }
        }
        if !self.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Activations of one layer over a whole sequence.
struct LayerCache {
    /// `T × (in + H)`: concatenated `[x_t; h_{t-1}]`
    xh: Vec<f64>,
    /// `T × 4H`: activated gates i, f, g, o
    gates: Vec<f64>,
    /// `(T + 1) × H`, row 0 is the zero initial state
    c: Vec<f64>,
    /// `T × H`
    tanh_c: Vec<f64>,
    /// `(T + 1) × H`
    h: Vec<f64>,
}

impl LayerCache {
    fn h_at(&self, t: usize, hidden: usize) -> &[f64] {
        &self.h[(t + 1) * hidden..(t + 2) * hidden]
    }
}

fn layer_forward(layer: &LstmLayer, inputs: &[f64], steps: usize) -> LayerCache {
    let hidden = layer.hidden();
    let in_dim = layer.input_dim();
    let width = in_dim + hidden;
    let mut cache = LayerCache {
        xh: vec![0.0; steps * width],
        gates: vec![0.0; steps * 4 * hidden],
        c: vec![0.0; (steps + 1) * hidden],
        tanh_c: vec![0.0; steps * hidden],
        h: vec![0.0; (steps + 1) * hidden],
    };
    for t in 0..steps {
        let xh = &mut cache.xh[t * width..(t + 1) * width];
        xh[..in_dim].copy_from_slice(&inputs[t * in_dim..(t + 1) * in_dim]);
        xh[in_dim..].copy_from_slice(&cache.h[t * hidden..(t + 1) * hidden]);

        let z = &mut cache.gates[t * 4 * hidden..(t + 1) * 4 * hidden];
        z.copy_from_slice(&layer.bias);
        layer.weights.matvec_add(xh, z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * hidden..3 * hidden).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }

        let (c_prev, c_rest) = cache.c[t * hidden..].split_at_mut(hidden);
        let c_next = &mut c_rest[..hidden];
        let tanh_c = &mut cache.tanh_c[t * hidden..(t + 1) * hidden];
        let h_next = &mut cache.h[(t + 1) * hidden..(t + 2) * hidden];
        for j in 0..hidden {
            let (i, f, g, o) = (z[j], z[hidden + j], z[2 * hidden + j], z[3 * hidden + j]);
            c_next[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c_next[j].tanh();
            h_next[j] = o * tanh_c[j];
        }
    }
    cache
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    probs: Vec<f64>,
}

fn check_input(params: &ModelParams, embedded: &Matrix) -> Result<usize> {
    if embedded.rows() == 0 {
        return Err(Error::EmptySequence);
    }
    if embedded.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input dimension {} does not match model input {}",
            embedded.cols(),
            params.input_dim()
        )));
    }
    Ok(embedded.rows())
}

fn forward_cached(params: &ModelParams, embedded: &Matrix) -> Result<ForwardCache> {
    let steps = check_input(params, embedded)?;
    let hidden = params.hidden();
    let mut layers = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let cache = if l == 0 {
            layer_forward(layer, embedded.as_slice(), steps)
        } else {
            let below: &LayerCache = &layers[l - 1];
            layer_forward(layer, &below.h[hidden..], steps)
        };
        layers.push(cache);
    }
    let top = layers.last().expect("at least one layer").h_at(steps - 1, hidden);
    let mut logits = params.head_bias.clone();
    params.head_weights.matvec_add(top, &mut logits);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logit in forward pass".into()));
    }
    let probs = logits.iter().map(|&z| sigmoid(z).clamp(MIN_PROB, MAX_PROB)).collect();
    Ok(ForwardCache { layers, probs })
}

/// Runs the network on a `T × D` embedded sequence.
pub fn forward(params: &ModelParams, embedded: &Matrix) -> Result<PredictionVector> {
    Ok(PredictionVector(forward_cached(params, embedded)?.probs))
}

/// Loss, parameter gradients (without embedding) and the input gradient of one sample.
pub(crate) struct SampleGrad {
    pub loss: f64,
    pub grads: Gradients,
    pub d_input: Matrix,
}

/// Backpropagation through time for a single sample; gradients are of the
/// unscaled per-sample loss.
pub(crate) fn sample_backward(params: &ModelParams, embedded: &Matrix, label: &LabelVector) -> Result<SampleGrad> {
    if label.len() != params.classes() {
        return Err(Error::Shape(format!(
            "label has {} classes, model has {}",
            label.len(),
            params.classes()
        )));
    }
    let cache = forward_cached(params, embedded)?;
    let steps = embedded.rows();
    let hidden = params.hidden();
    let loss = bce_sum(&cache.probs, label.values());

    let mut grads = ModelParams::zeros(params.input_dim(), hidden, params.classes(), None);

    // sigmoid + BCE composite: dL/dlogit = p - y
    let d_logits: Vec<f64> = cache
        .probs
        .iter()
        .zip(label.values())
        .map(|(&p, &y)| p - f64::from(y))
        .collect();
    let top = cache.layers.last().expect("layers").h_at(steps - 1, hidden);
    grads.head_weights.add_outer(&d_logits, top);
    grads.head_bias.copy_from_slice(&d_logits);

    // gradient flowing into each layer's hidden outputs, `T × H`
    let mut d_h_ext = vec![0.0; steps * hidden];
    params.head_weights.matvec_t_add(&d_logits, &mut d_h_ext[(steps - 1) * hidden..]);

    let mut d_input = Matrix::zeros(steps, params.input_dim());
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let lc = &cache.layers[l];
        let in_dim = layer.input_dim();
        let width = in_dim + hidden;
        let g = &mut grads.layers[l];

        let mut d_below = vec![0.0; steps * in_dim];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dz = vec![0.0; 4 * hidden];
        let mut dxh = vec![0.0; width];
        for t in (0..steps).rev() {
            let gates = &lc.gates[t * 4 * hidden..(t + 1) * 4 * hidden];
            let c_prev = &lc.c[t * hidden..(t + 1) * hidden];
            let tanh_c = &lc.tanh_c[t * hidden..(t + 1) * hidden];
            for j in 0..hidden {
                let (i, f, gg, o) = (gates[j], gates[hidden + j], gates[2 * hidden + j], gates[3 * hidden + j]);
                let dh = d_h_ext[t * hidden + j] + dh_next[j];
                let d_o = dh * tanh_c[j];
                let dc = dh * o * (1.0 - tanh_c[j] * tanh_c[j]) + dc_next[j];
                let d_i = dc * gg;
                let d_g = dc * i;
                let d_f = dc * c_prev[j];
                dc_next[j] = dc * f;
                dz[j] = d_i * i * (1.0 - i);
                dz[hidden + j] = d_f * f * (1.0 - f);
                dz[2 * hidden + j] = d_g * (1.0 - gg * gg);
                dz[3 * hidden + j] = d_o * o * (1.0 - o);
            }
            let xh = &lc.xh[t * width..(t + 1) * width];
            g.weights.add_outer(&dz, xh);
            for (b, d) in g.bias.iter_mut().zip(&dz) {
                *b += d;
            }
            dxh.fill(0.0);
            layer.weights.matvec_t_add(&dz, &mut dxh);
            d_below[t * in_dim..(t + 1) * in_dim].copy_from_slice(&dxh[..in_dim]);
            dh_next.copy_from_slice(&dxh[in_dim..]);
        }
        if l == 0 {
            d_input.as_mut_slice().copy_from_slice(&d_below);
        } else {
            d_h_ext = d_below;
        }
    }

    if !grads.is_finite() || !d_input.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok(SampleGrad { loss, grads, d_input })
}

/// Mean loss over the batch and its gradient with respect to every network
/// parameter. Inputs are already embedded, so no embedding gradient is
/// produced here.
pub fn backward(params: &ModelParams, batch: &[(Matrix, LabelVector)]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut total = params.zeros_like();
    total.embedding = None;
    let mut loss = 0.0;
    for (x, y) in batch {
        let sg = sample_backward(params, x, y)?;
        loss += sg.loss;
        total.add_assign(&sg.grads);
    }
    let inv = 1.0 / batch.len() as f64;
    total.scale(inv);
    Ok((loss * inv, total))
}
