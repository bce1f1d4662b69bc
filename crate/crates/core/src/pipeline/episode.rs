//! Closed-loop leader/follower episodes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::log::{FlightLog, FlightRow};
use super::trajectory::Trajectory;
use crate::control::LqrGains;
use crate::dynamics::{step, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::field::{noisy_accel_with, FieldParams};
use crate::geometry::{FrameRotation, InteractionState, Vec3};
use crate::learning::ForcePredictor;

/// What the follower subtracts from its feedback command.
#[derive(Clone, Copy)]
pub enum Compensation<'a> {
    None,
    Model(&'a dyn ForcePredictor),
    /// The true field, fed directly.
    Oracle,
}

pub struct Episode<'a> {
    pub leader: &'a dyn Trajectory,
    pub follower: &'a dyn Trajectory,
    pub compensation: Compensation<'a>,
    /// `None` flies without any downwash.
    pub field: Option<FieldParams>,
    pub gains: &'a LqrGains,
    pub vehicle: VehicleParams,
    pub duration: f64,
    pub dt: f64,
    /// Standard deviation of the acceleration measurement noise, m/s².
    pub noise_sigma: f64,
    pub seed: u64,
    /// Evaluate the model on every other step only and hold its output in
    /// between, emulating a model loop slower than the control loop.
    pub hold_model: bool,
}

impl Episode<'_> {
    /// Both vehicles start exactly on their references at `t = 0`.
    pub fn run(&self) -> Result<FlightLog> {
        run_episode(self)
    }
}

fn start_state(traj: &dyn Trajectory) -> VehicleState {
    let r = traj.sample(0.0);
    VehicleState { p: r.p_ref, v: r.v_ref, psi: r.psi_ref }
}

/// Runs the loop: the leader tracks its own reference undisturbed; the
/// follower tracks its reference with `u = u_fb - f̂`, feels the field, and
/// logs the acceleration it measured over each control period.
pub fn run_episode(ep: &Episode<'_>) -> Result<FlightLog> {
    if !(ep.dt > 0.0 && ep.duration >= 0.0) {
        return Err(Error::InvalidArgument("episode needs dt > 0 and duration >= 0".into()));
    }
    ep.vehicle.validate()?;
    if let Some(f) = &ep.field {
        f.validate()?;
    }
    let frame = FrameRotation::identity();
    let n = (ep.duration / ep.dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(ep.seed);
    let mut a = start_state(ep.leader);
    let mut b = start_state(ep.follower);
    let mut rows = Vec::with_capacity(n);
    let mut held_prediction = Vec3::zeros();
    for k in 0..n {
        let t = k as f64 * ep.dt;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFiniteState { step: k, t });
        }
        let ref_a = ep.leader.sample(t);
        let ref_b = ep.follower.sample(t);
        let x = InteractionState::from_positions(&a.p, &b.p, a.v, b.v);
        let f_true = ep.field.map(|f| f.force(&x, &frame));
        let f_pred = match ep.compensation {
            Compensation::None => Vec3::zeros(),
            Compensation::Oracle => f_true.unwrap_or_else(Vec3::zeros),
            Compensation::Model(m) => {
                if !ep.hold_model || k % 2 == 0 {
                    held_prediction = m.predict_force(&x, &frame);
                }
                held_prediction
            }
        };
        let u_a = ep.gains.feedback(&a, &ref_a, ep.vehicle.a_max);
        let u_fb = ep.gains.feedback_raw(&b, &ref_b);
        let u_cmd = ep.gains.compensated_feedback(&b, &ref_b, &f_pred, ep.vehicle.a_max);
        let disturbance = f_true.unwrap_or_else(Vec3::zeros);
        let next_a = step(&a, &u_a, &Vec3::zeros(), ep.dt).map_err(|_| Error::NonFiniteState { step: k, t })?;
        let next_b = step(&b, &u_cmd, &disturbance, ep.dt).map_err(|_| Error::NonFiniteState { step: k, t })?;
        // Velocity difference over the period: the acceleration held during it.
        let a_true = (next_b.v - b.v) / ep.dt;
        let a_meas = noisy_accel_with(&a_true, ep.noise_sigma, &mut rng);
        rows.push(FlightRow { t, state_a: a, state_b: b, ref_b, u_fb, u_cmd, f_pred, a_meas, f_true });
        a = next_a;
        b = next_b;
    }
    Ok(FlightLog { dt: ep.dt, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::CostWeights;
    use crate::pipeline::trajectory::{Hover, Lemniscate, Transect};

    fn gains() -> LqrGains {
        LqrGains::design(&CostWeights::default()).unwrap()
    }

    fn episode<'a>(
        leader: &'a dyn Trajectory,
        follower: &'a dyn Trajectory,
        gains: &'a LqrGains,
        field: Option<FieldParams>,
        compensation: Compensation<'a>,
        duration: f64,
    ) -> Episode<'a> {
        Episode {
            leader,
            follower,
            compensation,
            field,
            gains,
            vehicle: VehicleParams::default(),
            duration,
            dt: 0.02,
            noise_sigma: 0.0,
            seed: 1,
            hold_model: false,
        }
    }

    #[test]
    fn lemniscate_without_field_tracks_closely() {
        let g = gains();
        let leader = Hover { p0: Vec3::new(0.0, 0.0, -2.5) };
        let follower = Lemniscate::default();
        let log = episode(&leader, &follower, &g, None, Compensation::None, 28.0).run().unwrap();
        assert_eq!(log.len(), 1400);
        let mean: f64 = log.rows.iter().map(|r| (r.state_b.p - r.ref_b.p_ref).norm()).sum::<f64>() / log.len() as f64;
        assert!(mean < 5e-3, "mean error {mean}");
    }

    #[test]
    fn measured_acceleration_is_command_plus_force() {
        let g = gains();
        let leader = Hover { p0: Vec3::new(0.0, 0.0, -2.5) };
        let follower = Transect::default();
        let log = episode(&leader, &follower, &g, Some(FieldParams::default()), Compensation::None, 6.0)
            .run()
            .unwrap();
        for r in &log.rows {
            let expect = r.u_cmd.a + r.f_true.unwrap();
            assert!((r.a_meas - expect).abs().max() < 1e-9);
        }
        assert!(log.rows.iter().any(|r| r.f_true.unwrap().z > 0.5));
    }

    #[test]
    fn timestamps_are_uniform() {
        let g = gains();
        let h = Hover { p0: Vec3::zeros() };
        let log = episode(&h, &h, &g, None, Compensation::None, 1.0).run().unwrap();
        for (k, r) in log.rows.iter().enumerate() {
            assert_eq!(r.t, k as f64 * 0.02);
        }
    }
}
