//! The equivariant force model and the two non-equivariant baselines.

use nalgebra::{DVector, Matrix3x2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Layer, LayerRecord, Mlp};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::{feature_map, polar_angle, FeatureMode, FrameRotation, InteractionState, Vec3};

pub const MODEL_FORMAT: &str = "downwash-model/1";
pub const HIDDEN_WIDTH: usize = 32;
pub const DEEP_HIDDEN_LAYERS: usize = 6;
pub const DEFAULT_SPECTRAL_CAP: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Equivariant,
    ShallowNonequiv,
    DeepNonequiv,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] =
        [ModelKind::Equivariant, ModelKind::ShallowNonequiv, ModelKind::DeepNonequiv];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Equivariant => "equivariant",
            ModelKind::ShallowNonequiv => "shallow_nonequiv",
            ModelKind::DeepNonequiv => "deep_nonequiv",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equivariant" => Ok(ModelKind::Equivariant),
            "shallow_nonequiv" | "shallow" => Ok(ModelKind::ShallowNonequiv),
            "deep_nonequiv" | "deep" => Ok(ModelKind::DeepNonequiv),
            other => Err(Error::InvalidArgument(format!("unknown model kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which frame the equivariant model treats as the leader frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConvention {
    /// Use the caller-supplied leader rotation.
    #[default]
    LeaderBody,
    /// Always use the identity: symmetry about the inertial down axis.
    Inertial,
}

/// Per-input affine standardization `(x - mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Self { mean: vec![0.0; n], scale: vec![1.0; n] }
    }

    /// Fits mean and standard deviation per column; near-constant columns
    /// keep unit scale.
    pub fn fit<'a>(n: usize, inputs: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut count = 0usize;
        let mut mean = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        for x in inputs {
            count += 1;
            for k in 0..n {
                let d = x[k] - mean[k];
                mean[k] += d / count as f64;
                m2[k] += d * (x[k] - mean[k]);
            }
        }
        let scale = m2
            .iter()
            .map(|s| {
                let sd = if count > 1 { (s / count as f64).sqrt() } else { 0.0 };
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivariantModel {
    pub net: Mlp,
    pub mode: FeatureMode,
    pub frame: FrameConvention,
    pub standardizer: Standardizer,
}

impl EquivariantModel {
    pub fn new(mode: FeatureMode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::random(&[mode.len(), HIDDEN_WIDTH, 2], &mut rng);
        Self {
            net,
            mode,
            frame: FrameConvention::LeaderBody,
            standardizer: Standardizer::identity(mode.len()),
        }
    }

    fn frame<'a>(&self, r_ma: &'a FrameRotation) -> std::borrow::Cow<'a, FrameRotation> {
        match self.frame {
            FrameConvention::LeaderBody => std::borrow::Cow::Borrowed(r_ma),
            FrameConvention::Inertial => std::borrow::Cow::Owned(FrameRotation::identity()),
        }
    }

    /// Invariant features before standardization.
    pub fn raw_features(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec<f64> {
        feature_map(x, &self.frame(r_ma), self.mode).as_slice().to_vec()
    }

    /// Linear map from the two network outputs to the inertial force:
    /// `Rᵀ [cos φ, sin φ, 0]` and `Rᵀ e3`.
    pub fn output_head(&self, x: &InteractionState, r_ma: &FrameRotation) -> Matrix3x2<f64> {
        let r = self.frame(r_ma);
        let (s, c) = polar_angle(x, &r).sin_cos();
        let lateral = r.to_inertial(&Vec3::new(c, s, 0.0));
        let vertical = r.to_inertial(&Vec3::z());
        Matrix3x2::from_columns(&[lateral, vertical])
    }

    pub fn predict(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec3 {
        let mut h = self.raw_features(x, r_ma);
        self.standardizer.apply(&mut h);
        let out = self.net.forward(&h).expect("feature width matches network");
        self.output_head(x, r_ma) * Vector2::new(out[0], out[1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    pub kind: ModelKind,
    pub net: Mlp,
    pub standardizer: Standardizer,
    /// Bound on each weight matrix's largest singular value (deep kind).
    pub spectral_cap: Option<f64>,
}

impl BaselineModel {
    pub fn shallow(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            kind: ModelKind::ShallowNonequiv,
            net: Mlp::random(&[6, HIDDEN_WIDTH, 3], &mut rng),
            standardizer: Standardizer::identity(6),
            spectral_cap: None,
        }
    }

    /// `6 → 32 × hidden_layers → 3`.
    pub fn deep(hidden_layers: usize, width: usize, spectral_cap: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![6];
        widths.extend(std::iter::repeat(width).take(hidden_layers));
        widths.push(3);
        Self {
            kind: ModelKind::DeepNonequiv,
            net: Mlp::random(&widths, &mut rng),
            standardizer: Standardizer::identity(6),
            spectral_cap: Some(spectral_cap),
        }
    }

    /// Raw `[Δp, v^B]`; the leader velocity is left out.
    pub fn raw_inputs(x: &InteractionState) -> Vec<f64> {
        let mut v = Vec::with_capacity(6);
        v.extend_from_slice(x.delta_p.as_slice());
        v.extend_from_slice(x.v_follower.as_slice());
        v
    }

    pub fn predict(&self, x: &InteractionState) -> Vec3 {
        let mut input = Self::raw_inputs(x);
        self.standardizer.apply(&mut input);
        let out = self.net.forward(&input).expect("input width matches network");
        Vec3::new(out[0], out[1], out[2])
    }

    /// Layer count including the input layer.
    pub fn layer_count(&self) -> usize {
        self.net.layers.len() + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Equivariant(EquivariantModel),
    Baseline(BaselineModel),
}

/// Anything that predicts the exogenous force on the follower.
pub trait ForcePredictor {
    fn predict_force(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec3;
}

impl ForcePredictor for Model {
    fn predict_force(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec3 {
        self.predict(x, r_ma)
    }
}

impl Model {
    /// Freshly initialized model of the given kind with default widths.
    pub fn new(kind: ModelKind, mode: FeatureMode, seed: u64) -> Self {
        match kind {
            ModelKind::Equivariant => Model::Equivariant(EquivariantModel::new(mode, seed)),
            ModelKind::ShallowNonequiv => Model::Baseline(BaselineModel::shallow(seed)),
            ModelKind::DeepNonequiv => Model::Baseline(BaselineModel::deep(
                DEEP_HIDDEN_LAYERS,
                HIDDEN_WIDTH,
                DEFAULT_SPECTRAL_CAP,
                seed,
            )),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Equivariant(_) => ModelKind::Equivariant,
            Model::Baseline(b) => b.kind,
        }
    }

    pub fn net(&self) -> &Mlp {
        match self {
            Model::Equivariant(m) => &m.net,
            Model::Baseline(m) => &m.net,
        }
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        match self {
            Model::Equivariant(m) => &mut m.net,
            Model::Baseline(m) => &mut m.net,
        }
    }

    pub fn standardizer(&self) -> &Standardizer {
        match self {
            Model::Equivariant(m) => &m.standardizer,
            Model::Baseline(m) => &m.standardizer,
        }
    }

    pub fn set_standardizer(&mut self, s: Standardizer) {
        match self {
            Model::Equivariant(m) => m.standardizer = s,
            Model::Baseline(m) => m.standardizer = s,
        }
    }

    pub fn spectral_cap(&self) -> Option<f64> {
        match self {
            Model::Equivariant(_) => None,
            Model::Baseline(m) => m.spectral_cap,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.net().input_dim()
    }

    /// Network input before standardization.
    pub fn raw_input(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec<f64> {
        match self {
            Model::Equivariant(m) => m.raw_features(x, r_ma),
            Model::Baseline(_) => BaselineModel::raw_inputs(x),
        }
    }

    /// Output head for the equivariant kind; baselines emit the force directly.
    pub fn output_head(&self, x: &InteractionState, r_ma: &FrameRotation) -> Option<Matrix3x2<f64>> {
        match self {
            Model::Equivariant(m) => Some(m.output_head(x, r_ma)),
            Model::Baseline(_) => None,
        }
    }

    pub fn predict(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec3 {
        match self {
            Model::Equivariant(m) => m.predict(x, r_ma),
            Model::Baseline(m) => m.predict(x),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.net().parameter_count()
    }

    pub fn to_artifact(&self, train_config: Option<&TrainConfig>) -> ModelArtifact {
        let (mode, frame) = match self {
            Model::Equivariant(m) => (Some(m.mode), Some(m.frame)),
            Model::Baseline(_) => (None, None),
        };
        ModelArtifact {
            format: MODEL_FORMAT.to_string(),
            kind: self.kind(),
            mode,
            frame,
            layers: self.net().layers.iter().map(LayerRecord::from).collect(),
            standardizer: self.standardizer().clone(),
            spectral_cap: self.spectral_cap(),
            train_config: train_config.cloned(),
        }
    }

    pub fn from_artifact(a: &ModelArtifact) -> Result<Self> {
        if a.format != MODEL_FORMAT {
            return Err(Error::UnsupportedFormat(a.format.clone()));
        }
        let layers = a.layers.iter().map(Layer::try_from).collect::<Result<Vec<_>>>()?;
        let net = Mlp::new(layers)?;
        let n_in = net.input_dim();
        if a.standardizer.mean.len() != n_in || a.standardizer.scale.len() != n_in {
            return Err(Error::DimensionMismatch { expected: n_in, got: a.standardizer.mean.len() });
        }
        match a.kind {
            ModelKind::Equivariant => {
                let mode = a.mode.ok_or_else(|| {
                    Error::InvalidArgument("equivariant artifact missing feature mode".into())
                })?;
                if n_in != mode.len() || net.output_dim() != 2 {
                    return Err(Error::DimensionMismatch { expected: mode.len(), got: n_in });
                }
                Ok(Model::Equivariant(EquivariantModel {
                    net,
                    mode,
                    frame: a.frame.unwrap_or_default(),
                    standardizer: a.standardizer.clone(),
                }))
            }
            kind => {
                if n_in != 6 || net.output_dim() != 3 {
                    return Err(Error::DimensionMismatch { expected: 6, got: n_in });
                }
                Ok(Model::Baseline(BaselineModel {
                    kind,
                    net,
                    standardizer: a.standardizer.clone(),
                    spectral_cap: a.spectral_cap,
                }))
            }
        }
    }

    pub fn save(&self, path: &std::path::Path, train_config: Option<&TrainConfig>) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_artifact(train_config))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: ModelArtifact = serde_json::from_str(text)?;
        Self::from_artifact(&artifact)
    }
}

/// Serialized model: shapes, row-major weights, input standardization and
/// the config it was trained with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<FeatureMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameConvention>,
    pub layers: Vec<LayerRecord>,
    pub standardizer: Standardizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
}

/// Zero-initialized copy of a network's shapes, used in tests and as a
/// neutral predictor.
pub fn zero_like(model: &Model) -> Model {
    let mut m = model.clone();
    for l in &mut m.net_mut().layers {
        l.weight.fill(0.0);
        l.bias = DVector::zeros(l.bias.len());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(Model::new(ModelKind::Equivariant, FeatureMode::NearHover, 0).parameter_count(), 258);
        assert_eq!(Model::new(ModelKind::Equivariant, FeatureMode::Full, 0).parameter_count(), 290);
        assert_eq!(Model::new(ModelKind::ShallowNonequiv, FeatureMode::NearHover, 0).parameter_count(), 323);
        let deep = BaselineModel::deep(DEEP_HIDDEN_LAYERS, HIDDEN_WIDTH, 2.0, 0);
        assert_eq!(deep.layer_count(), 8);
        assert_eq!(deep.net.parameter_count(), 6 * 32 + 32 + 5 * (32 * 32 + 32) + 32 * 3 + 3);
    }

    #[test]
    fn zero_network_predicts_zero() {
        let r = FrameRotation::from_axis_angle(&Vec3::new(0.2, 0.1, 1.0), 0.3);
        let x = InteractionState::new(Vec3::new(0.3, 0.1, -0.5), Vec3::zeros(), Vec3::new(0.2, 0.0, 0.0));
        for kind in ModelKind::ALL {
            let m = zero_like(&Model::new(kind, FeatureMode::Full, 3));
            assert_eq!(m.predict(&x, &r), Vec3::zeros());
        }
    }

    #[test]
    fn degenerate_planar_offset_uses_first_axis() {
        let mut m = EquivariantModel::new(FeatureMode::NearHover, 1);
        for l in &mut m.net.layers {
            l.weight.fill(0.0);
        }
        m.net.layers[1].bias = DVector::from_vec(vec![0.7, -0.2]);
        let x = InteractionState::new(Vec3::new(0.0, 0.0, -0.6), Vec3::zeros(), Vec3::new(0.4, 0.3, 0.0));
        let f = m.predict(&x, &FrameRotation::identity());
        assert!((f - Vec3::new(0.7, 0.0, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn artifact_round_trip() {
        for kind in ModelKind::ALL {
            let m = Model::new(kind, FeatureMode::NearHover, 11);
            let json = serde_json::to_string(&m.to_artifact(None)).unwrap();
            assert_eq!(Model::from_json(&json).unwrap(), m);
        }
    }

    #[test]
    fn artifact_rejects_wrong_format_and_shapes() {
        let m = Model::new(ModelKind::Equivariant, FeatureMode::NearHover, 0);
        let mut a = m.to_artifact(None);
        a.format = "something-else".into();
        assert!(matches!(Model::from_artifact(&a), Err(Error::UnsupportedFormat(_))));
        let mut a = m.to_artifact(None);
        a.mode = Some(FeatureMode::Full);
        assert!(Model::from_artifact(&a).is_err());
    }

    #[test]
    fn standardizer_fit() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(2, rows.iter().map(|r| r.as_slice()));
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        let mut x = [3.0, 6.0];
        s.apply(&mut x);
        assert_eq!(x, [1.0, 1.0]);
    }
}
