//! Loss, gradients, the training loop and validation metrics.

use nalgebra::{DMatrix, DVector, Matrix3x2, Vector2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::dataset::{Dataset, DatasetRow};
use super::mlp::Gradients;
use super::model::{Model, Standardizer};
use super::spectral::spectral_normalize_with;
use crate::error::{Error, Result};
use crate::geometry::{FrameRotation, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Singular-value bound applied to the deep baseline after every step.
    pub spectral_cap: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            batch_size: 64,
            epochs: 300,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            spectral_cap: 2.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.epochs > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.spectral_cap > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("training hyperparameters must be positive".into()))
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

/// Mean squared error over the three inertial axes.
pub fn mse_loss(pred: &Vec3, label: &Vec3) -> f64 {
    (pred - label).norm_squared() / 3.0
}

/// Dataset rows are recorded with the leader hovering level, so the leader
/// frame coincides with the inertial frame.
fn dataset_frame() -> FrameRotation {
    FrameRotation::identity()
}

/// Network inputs (standardized, column per row), output heads and labels.
pub struct EncodedBatch {
    pub inputs: DMatrix<f64>,
    pub heads: Option<Vec<Matrix3x2<f64>>>,
    pub labels: Vec<Vec3>,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn select(&self, idx: &[usize]) -> EncodedBatch {
        let inputs = DMatrix::from_fn(self.inputs.nrows(), idx.len(), |i, j| self.inputs[(i, idx[j])]);
        EncodedBatch {
            inputs,
            heads: self.heads.as_ref().map(|h| idx.iter().map(|&k| h[k]).collect()),
            labels: idx.iter().map(|&k| self.labels[k]).collect(),
        }
    }
}

pub fn encode(model: &Model, rows: &[DatasetRow]) -> EncodedBatch {
    let r = dataset_frame();
    let n_in = model.input_dim();
    let std = model.standardizer();
    let mut inputs = DMatrix::zeros(n_in, rows.len());
    for (j, row) in rows.iter().enumerate() {
        let mut v = model.raw_input(&row.x, &r);
        std.apply(&mut v);
        inputs.column_mut(j).copy_from_slice(&v);
    }
    let heads = match model {
        Model::Equivariant(_) => Some(
            rows.iter().map(|row| model.output_head(&row.x, &r).expect("equivariant head")).collect(),
        ),
        Model::Baseline(_) => None,
    };
    EncodedBatch { inputs, heads, labels: rows.iter().map(|r| r.f_label).collect() }
}

/// Forces predicted for every column of an encoded batch.
fn forces_from_outputs(out: &DMatrix<f64>, heads: Option<&[Matrix3x2<f64>]>) -> Vec<Vec3> {
    (0..out.ncols())
        .map(|j| match heads {
            Some(h) => h[j] * Vector2::new(out[(0, j)], out[(1, j)]),
            None => Vec3::new(out[(0, j)], out[(1, j)], out[(2, j)]),
        })
        .collect()
}

/// Batch loss and `∂L/∂(network output)`.
fn loss_and_output_grad(out: &DMatrix<f64>, batch: &EncodedBatch) -> (f64, DMatrix<f64>) {
    let n = batch.len();
    let forces = forces_from_outputs(out, batch.heads.as_deref());
    let mut grad = DMatrix::zeros(out.nrows(), n);
    let mut loss = 0.0;
    let scale = 2.0 / (3.0 * n as f64);
    for j in 0..n {
        let err = forces[j] - batch.labels[j];
        loss += err.norm_squared();
        let df = err * scale;
        match &batch.heads {
            // Chain rule through the fixed lift: the lateral channel sees the
            // (cos φ, sin φ) row of the rotated error, the vertical channel
            // its third row.
            Some(h) => {
                let g = h[j].transpose() * df;
                grad[(0, j)] = g[0];
                grad[(1, j)] = g[1];
            }
            None => grad.column_mut(j).copy_from(&df),
        }
    }
    (loss / (3.0 * n as f64), grad)
}

fn loss_and_gradients(model: &Model, batch: &EncodedBatch) -> (f64, Gradients) {
    let cache = model.net().forward_batch(batch.inputs.clone());
    let (loss, grad_out) = loss_and_output_grad(cache.output(), batch);
    (loss, model.net().backward(&cache, grad_out))
}

/// Batch MSE and its gradient with respect to every network parameter, using
/// the model's current input standardization.
pub fn backward(model: &Model, batch: &[DatasetRow]) -> (f64, Gradients) {
    loss_and_gradients(model, &encode(model, batch))
}

/// Batch MSE without gradients.
pub fn batch_loss(model: &Model, batch: &[DatasetRow]) -> f64 {
    let enc = encode(model, batch);
    let cache = model.net().forward_batch(enc.inputs.clone());
    loss_and_output_grad(cache.output(), &enc).0
}

pub fn predict_rows(model: &Model, rows: &[DatasetRow]) -> Vec<Vec3> {
    if rows.is_empty() {
        return Vec::new();
    }
    let enc = encode(model, rows);
    let cache = model.net().forward_batch(enc.inputs);
    forces_from_outputs(cache.output(), enc.heads.as_deref())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Mean training loss of each epoch.
    pub history: Vec<f64>,
}

/// Fits the input standardization on `dataset`, then runs seeded mini-batch
/// Adam. The deep baseline is spectrally normalized after every step.
pub fn train(model: &mut Model, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let r = dataset_frame();
    let raw: Vec<Vec<f64>> = dataset.rows.iter().map(|row| model.raw_input(&row.x, &r)).collect();
    model.set_standardizer(Standardizer::fit(model.input_dim(), raw.iter().map(|v| v.as_slice())));
    if let Model::Baseline(b) = model {
        if b.spectral_cap.is_some() {
            b.spectral_cap = Some(config.spectral_cap);
        }
    }
    let encoded = encode(model, &dataset.rows);
    let cap = model.spectral_cap();
    let mut power_vectors: Vec<DVector<f64>> = model
        .net()
        .layers
        .iter()
        .map(|l| DVector::from_element(l.input_dim(), 1.0 / (l.input_dim() as f64).sqrt()))
        .collect();
    if let Some(cap) = cap {
        for (l, v) in model.net_mut().layers.iter_mut().zip(&mut power_vectors) {
            spectral_normalize_with(&mut l.weight, cap, v);
        }
    }

    let adam_cfg = config.adam();
    let mut state = AdamState::new(model.net().layers.iter().flat_map(|l| [l.weight.len(), l.bias.len()]));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = encoded.select(chunk);
            let (loss, grads) = loss_and_gradients(model, &batch);
            if !loss.is_finite() {
                return Err(Error::NonFinite { what: "training loss" });
            }
            epoch_loss += loss * chunk.len() as f64;
            let grad_tensors = grads.tensors();
            adam_step(&mut model.net_mut().tensors_mut(), &grad_tensors, &mut state, &adam_cfg);
            if let Some(cap) = cap {
                for (l, v) in model.net_mut().layers.iter_mut().zip(&mut power_vectors) {
                    spectral_normalize_with(&mut l.weight, cap, v);
                }
            }
        }
        history.push(epoch_loss / dataset.len() as f64);
    }
    Ok(TrainOutcome { history })
}

/// Validation errors, overall and per inertial axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub rows: usize,
    pub rmse: f64,
    pub rmse_axes: [f64; 3],
    /// Over the two horizontal axes.
    pub rmse_lateral: f64,
    pub rmse_vertical: f64,
}

pub fn evaluate(model: &Model, dataset: &Dataset) -> EvalMetrics {
    let preds = predict_rows(model, &dataset.rows);
    let labels: Vec<Vec3> = dataset.rows.iter().map(|r| r.f_label).collect();
    metrics_from_predictions(&preds, &labels)
}

pub fn metrics_from_predictions(preds: &[Vec3], labels: &[Vec3]) -> EvalMetrics {
    assert_eq!(preds.len(), labels.len());
    let n = preds.len().max(1) as f64;
    let mut sq = [0.0; 3];
    for (p, l) in preds.iter().zip(labels) {
        let e = p - l;
        for k in 0..3 {
            sq[k] += e[k] * e[k];
        }
    }
    let mse_axes = sq.map(|s| s / n);
    EvalMetrics {
        rows: preds.len(),
        rmse: (mse_axes.iter().sum::<f64>() / 3.0).sqrt(),
        rmse_axes: mse_axes.map(f64::sqrt),
        rmse_lateral: ((mse_axes[0] + mse_axes[1]) / 2.0).sqrt(),
        rmse_vertical: mse_axes[2].sqrt(),
    }
}
