//! Frames, planar projections and the `H_A` group action.
//!
//! All vectors live in the inertial NED frame. A [`FrameRotation`] is the
//! rotation from the inertial frame into the leader's body frame, so the
//! leader's body-down axis `a3` is the third row of the matrix. `H_A` is the
//! one-parameter group of rotations about `a3`, parameterized by
//! [`PlanarRotation`].

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Norm below which a planar projection is treated as degenerate.
pub const EPS_NORM: f64 = 1e-9;

const ROTATION_TOL: f64 = 1e-9;

/// Rotation from the inertial frame into the leader body frame (`R_M^A`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct FrameRotation(Matrix3<f64>);

impl FrameRotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and a positive determinant to 1e-9.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let gram_err = (m.transpose() * m - Matrix3::identity()).abs().max();
        if gram_err > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!(
                "columns not orthonormal (max |MᵀM - I| = {gram_err:e})"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!("determinant {det} != 1")));
        }
        Ok(Self(m))
    }

    /// Z-Y-X (yaw, pitch, roll) Euler angles of the body, returned as the
    /// inertial-to-body rotation.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Self {
        let body_to_inertial =
            nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw).into_inner();
        Self(body_to_inertial.transpose())
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let unit = nalgebra::Unit::new_normalize(*axis);
        Self(nalgebra::Rotation3::from_axis_angle(&unit, angle).into_inner())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Inertial vector expressed in the leader frame.
    pub fn to_body(&self, w: &Vec3) -> Vec3 {
        self.0 * w
    }

    /// Leader-frame vector expressed in the inertial frame.
    pub fn to_inertial(&self, w: &Vec3) -> Vec3 {
        self.0.transpose() * w
    }

    pub fn is_identity(&self) -> bool {
        self.0 == Matrix3::identity()
    }
}

impl Default for FrameRotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl TryFrom<[[f64; 3]; 3]> for FrameRotation {
    type Error = Error;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }
}

impl From<FrameRotation> for [[f64; 3]; 3] {
    fn from(r: FrameRotation) -> Self {
        let m = r.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

/// Rotation angle about `a3`, kept in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct PlanarRotation(f64);

impl PlanarRotation {
    pub fn new(omega: f64) -> Self {
        Self(wrap_two_pi(omega))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn compose(self, other: Self) -> Self {
        Self::new(self.0 + other.0)
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let a = wrap_two_pi(angle);
    if a > std::f64::consts::PI {
        a - TAU
    } else {
        a
    }
}

/// Relative kinematics of the leader/follower pair.
///
/// `delta_p` is leader position minus follower position, so its down
/// component is negative when the leader flies above the follower.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct InteractionState {
    pub delta_p: Vec3,
    pub v_leader: Vec3,
    pub v_follower: Vec3,
}

impl InteractionState {
    pub fn new(delta_p: Vec3, v_leader: Vec3, v_follower: Vec3) -> Self {
        Self { delta_p, v_leader, v_follower }
    }

    pub fn from_positions(
        p_leader: &Vec3,
        p_follower: &Vec3,
        v_leader: Vec3,
        v_follower: Vec3,
    ) -> Self {
        Self { delta_p: p_leader - p_follower, v_leader, v_follower }
    }

    pub fn is_finite(&self) -> bool {
        [self.delta_p, self.v_leader, self.v_follower]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
    }

    /// Flattened `[Δp, v^A, v^B]`.
    pub fn to_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out[..3].copy_from_slice(self.delta_p.as_slice());
        out[3..6].copy_from_slice(self.v_leader.as_slice());
        out[6..].copy_from_slice(self.v_follower.as_slice());
        out
    }

    pub fn from_array(a: &[f64; 9]) -> Self {
        Self {
            delta_p: Vec3::new(a[0], a[1], a[2]),
            v_leader: Vec3::new(a[3], a[4], a[5]),
            v_follower: Vec3::new(a[6], a[7], a[8]),
        }
    }
}

/// Which invariant features are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// All six features, including the planar leader speed.
    Full,
    /// Leader assumed hovering: the planar leader speed is dropped.
    NearHover,
}

impl FeatureMode {
    pub fn len(self) -> usize {
        match self {
            FeatureMode::Full => 6,
            FeatureMode::NearHover => 5,
        }
    }
}

/// Invariant features in order: cos_angle, planar |Δp|, planar |v^B|,
/// body-down Δp, body-down v^B and, in full mode, planar |v^A|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    values: [f64; 6],
    mode: FeatureMode,
}

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.mode.len()]
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn cos_angle(&self) -> f64 {
        self.values[0]
    }

    pub fn planar_dp_norm(&self) -> f64 {
        self.values[1]
    }

    pub fn planar_vb_norm(&self) -> f64 {
        self.values[2]
    }

    pub fn dp_down(&self) -> f64 {
        self.values[3]
    }

    pub fn vb_down(&self) -> f64 {
        self.values[4]
    }

    pub fn planar_va_norm(&self) -> Option<f64> {
        match self.mode {
            FeatureMode::Full => Some(self.values[5]),
            FeatureMode::NearHover => None,
        }
    }
}

/// Orthogonal projection of `w` onto `span{a1, a2}`.
pub fn project_planar(w: &Vec3, r_ma: &FrameRotation) -> Vec3 {
    let mut body = r_ma.to_body(w);
    body.z = 0.0;
    r_ma.to_inertial(&body)
}

/// Orthogonal projection of `w` onto `span{a3}`.
pub fn project_vertical(w: &Vec3, r_ma: &FrameRotation) -> Vec3 {
    w - project_planar(w, r_ma)
}

fn planar_body(w: &Vec3, r_ma: &FrameRotation) -> Vector2<f64> {
    let b = r_ma.to_body(w);
    Vector2::new(b.x, b.y)
}

/// The invariant feature map `h(x)`.
pub fn feature_map(x: &InteractionState, r_ma: &FrameRotation, mode: FeatureMode) -> FeatureVector {
    let dp_body = r_ma.to_body(&x.delta_p);
    let vb_body = r_ma.to_body(&x.v_follower);
    let dp_pl = Vector2::new(dp_body.x, dp_body.y);
    let vb_pl = Vector2::new(vb_body.x, vb_body.y);
    let dp_norm = dp_pl.norm();
    let vb_norm = vb_pl.norm();
    let cos_angle = if dp_norm < EPS_NORM || vb_norm < EPS_NORM {
        0.0
    } else {
        (dp_pl.dot(&vb_pl) / (dp_norm * vb_norm)).clamp(-1.0, 1.0)
    };
    let va_norm = planar_body(&x.v_leader, r_ma).norm();
    FeatureVector {
        values: [cos_angle, dp_norm, vb_norm, dp_body.z, vb_body.z, va_norm],
        mode,
    }
}

/// Polar angle of the planar part of `Δp` measured from `a1`, in `[0, 2π)`.
pub fn polar_angle(x: &InteractionState, r_ma: &FrameRotation) -> f64 {
    let p = planar_body(&x.delta_p, r_ma);
    if p.norm() < EPS_NORM {
        return 0.0;
    }
    wrap_two_pi(p.y.atan2(p.x))
}

/// The element of `H_A` rotating by `omega` about the leader's `a3` axis.
pub fn rotation_about_body_down(omega: PlanarRotation, r_ma: &FrameRotation) -> FrameRotation {
    let (s, c) = omega.radians().sin_cos();
    let about_z = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let r = r_ma.matrix();
    FrameRotation(r.transpose() * about_z * r)
}

/// Input action `H ⋆₁ x = [HΔp, v^A, Hv^B]`.
pub fn act_input(omega: PlanarRotation, x: &InteractionState, r_ma: &FrameRotation) -> InteractionState {
    let h = rotation_about_body_down(omega, r_ma);
    InteractionState {
        delta_p: h.matrix() * x.delta_p,
        v_leader: x.v_leader,
        v_follower: h.matrix() * x.v_follower,
    }
}

/// Output action `H ⋆₂ f = Hf`.
pub fn act_output(omega: PlanarRotation, f: &Vec3, r_ma: &FrameRotation) -> Vec3 {
    rotation_about_body_down(omega, r_ma).matrix() * f
}
