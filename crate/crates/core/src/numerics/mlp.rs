//! Feed-forward ReLU classifier with hand-written backpropagation.
//!
//! Weights are stored `fan_in × fan_out`, so a layer computes `z = x·W + b`.
//! Hidden layers apply ReLU (derivative taken as 0 at 0); the last layer is
//! linear and produces logits.

use rand::Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer { weight: Matrix::zeros(fan_in, fan_out), bias: vec![0.0; fan_out] }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

/// Weights and biases of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    layers: Vec<Layer>,
}

/// Gradient of a scalar loss w.r.t. a [`ParameterSet`]; shape-identical to it.
pub type Gradient = ParameterSet;

impl ParameterSet {
    /// All-zero parameters for layer widths `[D, H₁, …, C]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "layer sizes must list at least input and output widths, all nonzero; got {sizes:?}"
            )));
        }
        Ok(ParameterSet { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() })
    }

    /// Kaiming-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        for layer in &mut p.layers {
            let bound = (6.0 / layer.fan_in() as f64).sqrt();
            for w in layer.weight.data_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape(
                    "ParameterSet::from_layers",
                    format!("layer {} fan_in = {}", k + 1, pair[0].fan_out()),
                    pair[1].fan_in(),
                ));
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(Error::shape(
                    "ParameterSet::from_layers",
                    format!("layer {k} bias of length {}", l.fan_out()),
                    l.bias.len(),
                ));
            }
        }
        Ok(ParameterSet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].fan_in()];
        s.extend(self.layers.iter().map(Layer::fan_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data().len() + l.bias.len()).sum()
    }

    pub fn same_shape(&self, other: &ParameterSet) -> bool {
        self.sizes() == other.sizes()
    }

    /// Flat view: layer by layer, weights (row-major) then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Mutable access to the `index`-th entry of [`flatten`](Self::flatten).
    pub fn flat_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for l in &mut self.layers {
            let nw = l.weight.data().len();
            if index < nw {
                return Some(&mut l.weight.data_mut()[index]);
            }
            index -= nw;
            if index < l.bias.len() {
                return Some(&mut l.bias[index]);
            }
            index -= l.bias.len();
        }
        None
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(
                "forward",
                format!("batch of shape Bx{} (network input dim)", self.input_dim()),
                format!("{}x{}", batch.rows(), batch.cols()),
            ));
        }
        Ok(())
    }
}

/// Per-layer inputs and pre-activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `inputs[k]` is the input to layer `k` (post-ReLU for k > 0).
    inputs: Vec<Matrix>,
    logits: Matrix,
}

impl Activations {
    pub fn logits(&self) -> &Matrix {
        &self.logits
    }
}

/// Forward pass keeping intermediate activations.
pub fn forward_cached(params: &ParameterSet, batch: &Matrix) -> Result<Activations> {
    params.check_batch(batch)?;
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut x = batch.clone();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = x.matmul(&layer.weight)?;
        z.add_row_vector(&layer.bias)?;
        inputs.push(x);
        if k + 1 < n {
            z.map_inplace(|v| if v > 0.0 { v } else { 0.0 });
        }
        x = z;
    }
    Ok(Activations { inputs, logits: x })
}

/// Logits `B×C` for a `B×D` batch.
pub fn forward(params: &ParameterSet, batch: &Matrix) -> Result<Matrix> {
    forward_cached(params, batch).map(|a| a.logits)
}

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.rows() {
        return Err(Error::shape("cross_entropy", format!("{} labels", logits.rows()), labels.len()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= logits.cols()) {
        return Err(Error::LabelOutOfRange { label, classes: logits.cols() });
    }
    Ok(())
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Per-sample `−log softmax(logits)[label]`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(logits, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(r, &label)| {
            let row = logits.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - (row[label] - max)
        })
        .collect())
}

fn check_weights(weights: &[f64], rows: usize) -> Result<()> {
    if weights.len() != rows {
        return Err(Error::shape("backward", format!("{rows} sample weights"), weights.len()));
    }
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::invalid(format!("sample weight {w} outside [0, 1]")));
    }
    Ok(())
}

/// Gradient of `(1/B)·Σ w_i·loss_i` from a cached forward pass.
pub fn backward_from(
    params: &ParameterSet,
    acts: &Activations,
    labels: &[usize],
    sample_weights: &[f64],
) -> Result<Gradient> {
    let logits = &acts.logits;
    check_labels(logits, labels)?;
    check_weights(sample_weights, logits.rows())?;

    let mut grad = ParameterSet::zeros(&params.sizes())?;
    if sample_weights.iter().all(|&w| w == 0.0) {
        return Ok(grad);
    }

    let batch = logits.rows() as f64;
    let mut delta = softmax(logits);
    for (r, (&label, &w)) in labels.iter().zip(sample_weights).enumerate() {
        let row = delta.row_mut(r);
        row[label] -= 1.0;
        let scale = w / batch;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }

    for k in (0..params.layers.len()).rev() {
        let input = &acts.inputs[k];
        let g = &mut grad.layers[k];
        g.weight = input.t_matmul(&delta)?;
        g.bias = delta.sum_rows();
        if k > 0 {
            let mut upstream = delta.matmul_t(&params.layers[k].weight)?;
            // input[k] is relu(z_{k-1}); relu'(z) = 1 iff z > 0 iff input > 0
            for (u, &a) in upstream.data_mut().iter_mut().zip(input.data()) {
                if a <= 0.0 {
                    *u = 0.0;
                }
            }
            delta = upstream;
        }
    }
    Ok(grad)
}

/// Gradient of the weighted mean cross-entropy over `batch`.
pub fn backward(params: &ParameterSet, batch: &Matrix, labels: &[usize], sample_weights: &[f64]) -> Result<Gradient> {
    let acts = forward_cached(params, batch)?;
    backward_from(params, &acts, labels, sample_weights)
}

/// Index of the largest entry in each row; ties go to the lowest index.
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
