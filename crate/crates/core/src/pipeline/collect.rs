//! Staged data collection: each stage flies closer to the leader than the
//! last, compensated by the model trained on everything collected so far.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episode::{Compensation, Episode};
use super::trajectory::{Hover, Lemniscate, Trajectory, Transect};
use crate::control::LqrGains;
use crate::dynamics::{VehicleParams, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::field::FieldParams;
use crate::geometry::{FeatureMode, Vec3};
use crate::learning::{compute_label, evaluate, train, Dataset, DatasetRow, EvalMetrics, Model, ModelKind, TrainConfig};

pub const STAGES: u8 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StagePlan {
    /// Vertical separation band per stage, m; sampled uniformly per episode.
    pub bands: [[f64; 2]; 3],
    /// Flight time per stage, s.
    pub stage_duration: f64,
    pub episode_duration: f64,
    /// Episode pattern, repeated: `true` is a transect, `false` a lemniscate.
    pub pattern: Vec<bool>,
    pub speed_range: [f64; 2],
    /// Largest horizontal offset of a transect track from the leader's axis, m.
    pub max_track_offset: f64,
    pub transect_span: f64,
    pub lemniscate: Lemniscate,
    pub leader: Vec3,
    pub noise_sigma: f64,
    /// Keep one dataset row per this many control steps.
    pub decimation: usize,
    pub dt: f64,
}

impl Default for StagePlan {
    fn default() -> Self {
        Self {
            bands: [[1.35, 1.75], [0.8, 1.2], [0.45, 0.6]],
            stage_duration: 340.0,
            episode_duration: 10.0,
            pattern: vec![true, false, true, false, true],
            speed_range: [0.25, 1.0],
            max_track_offset: 0.5,
            transect_span: 1.5,
            lemniscate: Lemniscate::default(),
            leader: Vec3::new(0.0, 0.0, -2.5),
            noise_sigma: 0.05,
            decimation: 5,
            dt: DEFAULT_DT,
        }
    }
}

impl StagePlan {
    pub fn validate(&self) -> Result<()> {
        let bands_ok = self.bands.iter().all(|b| 0.0 < b[0] && b[0] <= b[1])
            && self.bands.windows(2).all(|w| w[1][1] <= w[0][0]);
        if !bands_ok {
            return Err(Error::InvalidArgument("stage bands must be positive and decrease by stage".into()));
        }
        let ok = self.stage_duration > 0.0
            && self.episode_duration > 0.0
            && !self.pattern.is_empty()
            && 0.0 < self.speed_range[0]
            && self.speed_range[0] <= self.speed_range[1]
            && self.max_track_offset >= 0.0
            && self.transect_span > 0.0
            && self.noise_sigma >= 0.0
            && self.decimation > 0
            && self.dt > 0.0;
        if !ok {
            return Err(Error::InvalidArgument("invalid stage plan".into()));
        }
        self.lemniscate.validate()
    }

    pub fn episodes_per_stage(&self) -> usize {
        (self.stage_duration / self.episode_duration).ceil() as usize
    }

    /// Time between dataset rows, s.
    pub fn row_period(&self) -> f64 {
        self.dt * self.decimation as f64
    }

    pub fn total_duration(&self) -> f64 {
        self.stage_duration * f64::from(STAGES)
    }
}

/// Independent seed for stream `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.gen()
}

/// Shared settings for a collection or training run.
#[derive(Clone, Copy)]
pub struct CollectContext<'a> {
    pub plan: &'a StagePlan,
    pub field: &'a FieldParams,
    pub gains: &'a LqrGains,
    pub vehicle: VehicleParams,
}

enum Flight {
    Transect(Transect),
    Lemniscate(Lemniscate),
}

impl Trajectory for Flight {
    fn sample(&self, t: f64) -> crate::control::TrajectoryPoint {
        match self {
            Flight::Transect(tr) => tr.sample(t),
            Flight::Lemniscate(l) => l.sample(t),
        }
    }
}

/// Point `k` of a shifted 3-D additive-recurrence sequence in `[0, 1)³`, so
/// that even the first few episodes of a stage spread over the ranges.
fn stratified(k: usize, shift: &[f64; 3]) -> [f64; 3] {
    const G: f64 = 1.220_744_084_605_759_5;
    let alpha = [1.0 / G, 1.0 / (G * G), 1.0 / (G * G * G)];
    std::array::from_fn(|j| (shift[j] + k as f64 * alpha[j]).fract())
}

fn lerp(range: [f64; 2], u: f64) -> f64 {
    range[0] + (range[1] - range[0]) * u
}

fn sample_flight(plan: &StagePlan, stage: u8, episode: usize, shift: &[f64; 3], rng: &mut ChaCha8Rng) -> Flight {
    let is_transect = plan.pattern[episode % plan.pattern.len()];
    let kind_index = (0..episode).filter(|i| plan.pattern[i % plan.pattern.len()] == is_transect).count();
    let u = stratified(kind_index, shift);
    let sep = lerp(plan.bands[stage as usize], u[0]);
    let depth = plan.leader.z + sep;
    let speed = lerp(plan.speed_range, u[1]);
    if is_transect {
        let heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let offset = lerp([-plan.max_track_offset, plan.max_track_offset], u[2]);
        // Offset measured from the leader's axis; tracks are centered on the
        // origin along their own direction.
        let (s, c) = heading.sin_cos();
        let normal = Vec3::new(s, -c, 0.0);
        Flight::Transect(Transect {
            e1_fix: offset + normal.dot(&plan.leader),
            depth,
            speed,
            span: plan.transect_span,
            heading,
        })
    } else {
        let base = plan.lemniscate;
        // Scale the period so the peak speed matches the sampled speed.
        let w_unit = (base.a * base.a + 4.0 * base.b * base.b).sqrt();
        let period = std::f64::consts::TAU * w_unit / speed;
        let jitter = Vec3::new(rng.gen_range(-0.2..=0.2), rng.gen_range(-0.2..=0.2), 0.0);
        Flight::Lemniscate(Lemniscate {
            center: Vec3::new(plan.leader.x, plan.leader.y, depth) + jitter,
            period,
            phase: rng.gen_range(0.0..period),
            ..base
        })
    }
}

/// Flies one stage and returns its rows concatenated after `prior`.
///
/// Stages above 0 must be flown with the previous stage's model, whose
/// predictions are added back into the labels.
pub fn collect_stage(
    ctx: &CollectContext<'_>,
    stage: u8,
    prev_model: Option<&Model>,
    prior: &Dataset,
    seed: u64,
) -> Result<Dataset> {
    if stage >= STAGES {
        return Err(Error::InvalidArgument(format!("stage {stage} out of range")));
    }
    if stage > 0 && prev_model.is_none() {
        return Err(Error::MissingPreviousModel { stage });
    }
    ctx.plan.validate()?;
    let plan = ctx.plan;
    let leader = Hover { p0: plan.leader };
    let compensation = match prev_model {
        Some(m) => Compensation::Model(m),
        None => Compensation::None,
    };
    let mut out = prior.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::from(stage)));
    let shift: [f64; 3] = rng.gen();
    let mut stage_time = 0.0;
    for episode in 0..plan.episodes_per_stage() {
        let duration = plan.episode_duration.min(plan.stage_duration - stage_time);
        if duration <= 0.0 {
            break;
        }
        let flight = sample_flight(plan, stage, episode, &shift, &mut rng);
        let log = Episode {
            leader: &leader,
            follower: &flight,
            compensation,
            field: Some(*ctx.field),
            gains: ctx.gains,
            vehicle: ctx.vehicle,
            duration,
            dt: plan.dt,
            noise_sigma: plan.noise_sigma,
            seed: rng.gen(),
            hold_model: false,
        }
        .run()?;
        for row in log.rows.iter().step_by(plan.decimation) {
            out.rows.push(DatasetRow {
                t: stage_time + row.t,
                x: row.interaction(),
                f_label: compute_label(&row.a_meas, &row.u_fb.a, &row.effective_compensation()),
                stage,
            });
        }
        stage_time += duration;
    }
    Dataset::new(out.rows)
}

/// Models and datasets produced by the staged procedure.
#[derive(Clone, Debug)]
pub struct StagedRun {
    pub models: Vec<Model>,
    /// Cumulative training set of each stage.
    pub datasets: Vec<Dataset>,
}

impl StagedRun {
    pub fn deployment_model(&self) -> &Model {
        self.models.last().expect("staged run has three models")
    }

    pub fn final_dataset(&self) -> &Dataset {
        self.datasets.last().expect("staged run has three datasets")
    }
}

/// Collects and trains stage by stage; every model is trained from a fresh
/// initialization on all data collected so far.
pub fn sequential_train(
    ctx: &CollectContext<'_>,
    kind: ModelKind,
    mode: FeatureMode,
    config: &TrainConfig,
    seed: u64,
) -> Result<StagedRun> {
    let mut models: Vec<Model> = Vec::with_capacity(STAGES as usize);
    let mut datasets: Vec<Dataset> = Vec::with_capacity(STAGES as usize);
    let empty = Dataset::default();
    for stage in 0..STAGES {
        let prior = datasets.last().unwrap_or(&empty);
        let data = collect_stage(ctx, stage, models.last(), prior, seed)?;
        let model_seed = derive_seed(seed, 100 + u64::from(stage));
        let mut model = Model::new(kind, mode, model_seed);
        let cfg = TrainConfig { seed: model_seed, ..config.clone() };
        train(&mut model, &data, &cfg)?;
        models.push(model);
        datasets.push(data);
    }
    Ok(StagedRun { models, datasets })
}

/// Stream index reserved for held-out collection.
const HELD_OUT_STREAM: u64 = 0x7661_6c69_6461_7465;

/// Independent staged collection, same size and distribution as the training
/// run for `seed`, for validation.
pub fn held_out_dataset(
    ctx: &CollectContext<'_>,
    kind: ModelKind,
    mode: FeatureMode,
    config: &TrainConfig,
    seed: u64,
) -> Result<Dataset> {
    let run = sequential_train(ctx, kind, mode, config, derive_seed(seed, HELD_OUT_STREAM))?;
    Ok(run.datasets.into_iter().last().unwrap_or_default())
}

/// Validation RMSE of every staged model on `validation`.
pub fn staged_validation(run: &StagedRun, validation: &Dataset) -> Vec<EvalMetrics> {
    run.models.iter().map(|m| evaluate(m, validation)).collect()
}
