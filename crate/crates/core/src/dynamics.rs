//! Feedback-linearized multirotor plant.
//!
//! The state is `[p, v, ψ]` and the input `[a, ψ̇]`; position integrates
//! velocity, velocity integrates commanded acceleration plus any exogenous
//! force, and yaw integrates the yaw-rate command.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_pi, Vec3};

pub const STATE_DIM: usize = 7;
pub const INPUT_DIM: usize = 4;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type InputVector = SVector<f64, INPUT_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;

/// Default control period (50 Hz).
pub const DEFAULT_DT: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub p: Vec3,
    pub v: Vec3,
    pub psi: f64,
}

impl VehicleState {
    pub fn at_rest(p: Vec3) -> Self {
        Self { p, v: Vec3::zeros(), psi: 0.0 }
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::from_column_slice(&[
            self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z, self.psi,
        ])
    }

    /// Inverse of [`to_vector`](Self::to_vector); yaw is wrapped to `(-π, π]`.
    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            p: Vec3::new(x[0], x[1], x[2]),
            v: Vec3::new(x[3], x[4], x[5]),
            psi: wrap_pi(x[6]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).all(|c| c.is_finite()) && self.psi.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Commanded acceleration, NED, m/s².
    pub a: Vec3,
    pub psi_rate: f64,
}

impl ControlInput {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> InputVector {
        InputVector::new(self.a.x, self.a.y, self.a.z, self.psi_rate)
    }

    pub fn from_vector(u: &InputVector) -> Self {
        Self { a: Vec3::new(u[0], u[1], u[2]), psi_rate: u[3] }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|c| c.is_finite()) && self.psi_rate.is_finite()
    }

    /// Scales the acceleration so that `‖a‖ ≤ a_max`, keeping its direction.
    pub fn clamped(mut self, a_max: f64) -> Self {
        self.a = clamp_norm(&self.a, a_max);
        self
    }
}

pub fn clamp_norm(a: &Vec3, limit: f64) -> Vec3 {
    let n = a.norm();
    if n > limit {
        a * (limit / n)
    } else {
        *a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttitudeTarget {
    pub roll: f64,
    pub pitch: f64,
    pub psi_rate: f64,
    /// Collective thrust, N.
    pub thrust: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub mass: f64,
    pub g: f64,
    pub a_max: f64,
    /// Longest body diagonal; informational only.
    pub body_span: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { mass: 0.7, g: 9.81, a_max: 8.0, body_span: 0.26 }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.g > 0.0 && self.a_max > 0.0) {
            return Err(Error::InvalidArgument(
                "vehicle mass, gravity and a_max must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The `(A, B, C)` triple of the linearized plant.
pub fn linear_system() -> (StateMatrix, InputMatrix, StateMatrix) {
    let mut a = StateMatrix::zeros();
    let mut b = InputMatrix::zeros();
    for i in 0..3 {
        a[(i, i + 3)] = 1.0;
        b[(i + 3, i)] = 1.0;
    }
    b[(6, 3)] = 1.0;
    (a, b, StateMatrix::identity())
}

fn derivative(x: &StateVector, u: &InputVector) -> StateVector {
    let mut dx = StateVector::zeros();
    for i in 0..3 {
        dx[i] = x[i + 3];
        dx[i + 3] = u[i];
    }
    dx[6] = u[3];
    dx
}

/// One RK4 step with `u` and `f_ext` held over `dt`.
///
/// `f_ext` enters the three acceleration channels only.
pub fn step(state: &VehicleState, u: &ControlInput, f_ext: &Vec3, dt: f64) -> Result<VehicleState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite { what: "vehicle state" });
    }
    if !u.is_finite() {
        return Err(Error::NonFinite { what: "control input" });
    }
    if !f_ext.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite { what: "exogenous force" });
    }
    let mut total = u.to_vector();
    for i in 0..3 {
        total[i] += f_ext[i];
    }
    let x = state.to_vector();
    let k1 = derivative(&x, &total);
    let k2 = derivative(&(x + k1 * (dt / 2.0)), &total);
    let k3 = derivative(&(x + k2 * (dt / 2.0)), &total);
    let k4 = derivative(&(x + k3 * dt), &total);
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    Ok(VehicleState::from_vector(&next))
}

/// Thrust and roll/pitch that realize `a_des` at yaw `psi` (Z-Y-X Euler).
pub fn inversion_map(a_des: &Vec3, psi: f64, psi_rate: f64, params: &VehicleParams) -> Result<AttitudeTarget> {
    let thrust_dir = Vec3::new(0.0, 0.0, params.g) - a_des;
    let margin = thrust_dir.norm();
    if !margin.is_finite() {
        return Err(Error::NonFinite { what: "desired acceleration" });
    }
    if margin < 0.1 * params.g {
        return Err(Error::FreeFall { margin });
    }
    let n = thrust_dir / margin;
    // Body-down axis expressed in the yaw-aligned frame.
    let (s, c) = psi.sin_cos();
    let nx = c * n.x + s * n.y;
    let ny = -s * n.x + c * n.y;
    if n.z <= 0.0 {
        return Err(Error::InvalidArgument(
            "desired acceleration requires inverted flight".into(),
        ));
    }
    let roll = (-ny).clamp(-1.0, 1.0).asin();
    let pitch = nx.atan2(n.z);
    Ok(AttitudeTarget { roll, pitch, psi_rate, thrust: params.mass * margin })
}

/// Acceleration produced by an attitude/thrust pair through the rigid-body
/// model `m a = -R e3 T + m g e3`.
pub fn rigid_body_acceleration(target: &AttitudeTarget, psi: f64, params: &VehicleParams) -> Vec3 {
    let r = nalgebra::Rotation3::from_euler_angles(target.roll, target.pitch, psi);
    let body_down = r * Vec3::z();
    Vec3::new(0.0, 0.0, params.g) - body_down * (target.thrust / params.mass)
}
