//! Deployment comparisons: the same flight with and without compensation.

use serde::{Deserialize, Serialize};

use super::episode::{Compensation, Episode};
use super::log::FlightLog;
use super::metrics::{reduction, tracking_metrics, TrackingMetrics};
use super::trajectory::{Hover, Lemniscate, Trajectory, Transect};
use crate::control::LqrGains;
use crate::dynamics::{VehicleParams, DEFAULT_DT};
use crate::error::Result;
use crate::field::FieldParams;
use crate::geometry::Vec3;
use crate::learning::ForcePredictor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Deployment {
    pub leader: Vec3,
    pub transect: Transect,
    /// Transect flight time, s; defaults to one pass.
    pub transect_duration: f64,
    pub lemniscate: Lemniscate,
    pub lemniscate_duration: f64,
    pub noise_sigma: f64,
    pub dt: f64,
    pub hold_model: bool,
}

impl Default for Deployment {
    fn default() -> Self {
        let transect = Transect::default();
        let lemniscate = Lemniscate { phase: 7.0, ..Lemniscate::default() };
        Self {
            leader: Vec3::new(0.0, 0.0, -2.5),
            transect,
            transect_duration: transect.leg_duration(),
            lemniscate,
            lemniscate_duration: lemniscate.period,
            noise_sigma: 0.05,
            dt: DEFAULT_DT,
            hold_model: false,
        }
    }
}

/// Metrics of one trajectory flown uncompensated and compensated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: TrackingMetrics,
    pub compensated: TrackingMetrics,
    pub position_reduction: f64,
    pub vertical_reduction: f64,
    pub velocity_reduction: f64,
    #[serde(skip)]
    pub logs: Option<(FlightLog, FlightLog)>,
}

impl Comparison {
    fn new(baseline: FlightLog, compensated: FlightLog) -> Self {
        let b = tracking_metrics(&baseline);
        let c = tracking_metrics(&compensated);
        Self {
            position_reduction: reduction(b.position.total.mean, c.position.total.mean),
            vertical_reduction: reduction(b.position.vertical.mean, c.position.vertical.mean),
            velocity_reduction: reduction(b.velocity.total.mean, c.velocity.total.mean),
            baseline: b,
            compensated: c,
            logs: Some((baseline, compensated)),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn fly(
    follower: &dyn Trajectory,
    duration: f64,
    leader: &Hover,
    compensation: Compensation<'_>,
    field: Option<FieldParams>,
    gains: &LqrGains,
    vehicle: VehicleParams,
    d: &Deployment,
    seed: u64,
) -> Result<FlightLog> {
    Episode {
        leader,
        follower,
        compensation,
        field,
        gains,
        vehicle,
        duration,
        dt: d.dt,
        noise_sigma: d.noise_sigma,
        seed,
        hold_model: d.hold_model,
    }
    .run()
}

impl Deployment {
    #[allow(clippy::too_many_arguments)]
    fn compare(
        &self,
        follower: &dyn Trajectory,
        duration: f64,
        model: &dyn ForcePredictor,
        field: &FieldParams,
        gains: &LqrGains,
        vehicle: VehicleParams,
        seed: u64,
    ) -> Result<Comparison> {
        let leader = Hover { p0: self.leader };
        let base = fly(follower, duration, &leader, Compensation::None, Some(*field), gains, vehicle, self, seed)?;
        let comp =
            fly(follower, duration, &leader, Compensation::Model(model), Some(*field), gains, vehicle, self, seed)?;
        Ok(Comparison::new(base, comp))
    }

    pub fn transect(
        &self,
        model: &dyn ForcePredictor,
        field: &FieldParams,
        gains: &LqrGains,
        vehicle: VehicleParams,
        seed: u64,
    ) -> Result<Comparison> {
        self.transect.validate()?;
        self.compare(&self.transect, self.transect_duration, model, field, gains, vehicle, seed)
    }

    pub fn lemniscate(
        &self,
        model: &dyn ForcePredictor,
        field: &FieldParams,
        gains: &LqrGains,
        vehicle: VehicleParams,
        seed: u64,
    ) -> Result<Comparison> {
        self.lemniscate.validate()?;
        self.compare(&self.lemniscate, self.lemniscate_duration, model, field, gains, vehicle, seed)
    }
}
