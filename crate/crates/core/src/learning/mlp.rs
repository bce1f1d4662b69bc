//! Fully connected ReLU network with batched forward and reverse passes.
//!
//! Batches are stored column-per-sample (`features × batch`) so every layer
//! is one matrix product.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: DMatrix::zeros(output, input), bias: DVector::zeros(output) }
    }

    /// Uniform in `±1/√in` for weights and biases.
    pub fn random<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let weight = DMatrix::from_fn(output, input, |_, _| rng.gen_range(-bound..bound));
        let bias = DVector::from_fn(output, |_, _| rng.gen_range(-bound..bound));
        Self { weight, bias }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// ReLU on every layer but the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Activations kept from a forward pass; `activations[0]` is the input.
pub struct ForwardCache {
    pub activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].output_dim(),
                    got: pair[1].input_dim(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(Error::DimensionMismatch { expected: l.output_dim(), got: l.bias.len() });
            }
        }
        Ok(Self { layers })
    }

    /// Randomly initialized network with the given widths, input first.
    pub fn random<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "need input and output widths");
        let layers = widths.windows(2).map(|w| Layer::random(w[0], w[1], rng)).collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<DVector<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        let mut a = DVector::from_column_slice(input);
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            a = &l.weight * a + &l.bias;
            if i < last {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        Ok(a)
    }

    pub fn forward_batch(&self, input: DMatrix<f64>) -> ForwardCache {
        debug_assert_eq!(input.nrows(), self.input_dim());
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input);
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.weight * activations.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &l.bias;
            }
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    /// Parameter gradients given `∂L/∂output` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache, grad_output: DMatrix<f64>) -> Gradients {
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let a_prev = &cache.activations[i];
            let weight = &delta * a_prev.transpose();
            let bias = DVector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()));
            grads.push(Layer { weight, bias });
            if i > 0 {
                let mut back = l.weight.transpose() * &delta;
                back.zip_apply(a_prev, |d, a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    /// Parameter tensors in a fixed order: each layer's weight then bias.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }
}

/// Gradients with the same shapes as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &self.layers {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Row-major serialized layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl From<&Layer> for LayerRecord {
    fn from(l: &Layer) -> Self {
        let rows = l.weight.nrows();
        let cols = l.weight.ncols();
        let weights = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| l.weight[(i, j)])
            .collect();
        Self { rows, cols, weights, bias: l.bias.iter().copied().collect() }
    }
}

impl TryFrom<&LayerRecord> for Layer {
    type Error = Error;

    fn try_from(r: &LayerRecord) -> Result<Self> {
        if r.weights.len() != r.rows * r.cols {
            return Err(Error::DimensionMismatch { expected: r.rows * r.cols, got: r.weights.len() });
        }
        if r.bias.len() != r.rows {
            return Err(Error::DimensionMismatch { expected: r.rows, got: r.bias.len() });
        }
        if !r.weights.iter().chain(r.bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "network parameter" });
        }
        Ok(Layer {
            weight: DMatrix::from_row_slice(r.rows, r.cols, &r.weights),
            bias: DVector::from_vec(r.bias.clone()),
        })
    }
}
