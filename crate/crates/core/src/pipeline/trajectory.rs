//! Reference trajectories. Velocities and feedforward accelerations are the
//! analytic derivatives of the position.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::control::TrajectoryPoint;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub trait Trajectory {
    fn sample(&self, t: f64) -> TrajectoryPoint;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hover {
    pub p0: Vec3,
}

impl Trajectory for Hover {
    fn sample(&self, _t: f64) -> TrajectoryPoint {
        TrajectoryPoint::hover(self.p0)
    }
}

/// Figure-eight `center + (A sin(2πτ/T), B sin(4πτ/T), 0)` with
/// `τ = t + phase`; crosses its center at `τ = 0` and `τ = T/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lemniscate {
    pub center: Vec3,
    pub a: f64,
    pub b: f64,
    pub period: f64,
    /// Time shift, s.
    pub phase: f64,
}

impl Default for Lemniscate {
    fn default() -> Self {
        Self { center: Vec3::new(0.0, 0.0, -1.9), a: 1.5, b: 0.75, period: 28.0, phase: 0.0 }
    }
}

impl Lemniscate {
    pub fn validate(&self) -> Result<()> {
        if self.period > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument("lemniscate period must be positive".into()))
        }
    }
}

impl Trajectory for Lemniscate {
    fn sample(&self, t: f64) -> TrajectoryPoint {
        let w = TAU / self.period;
        let tau = t + self.phase;
        let (s1, c1) = (w * tau).sin_cos();
        let (s2, c2) = (2.0 * w * tau).sin_cos();
        TrajectoryPoint {
            p_ref: self.center + Vec3::new(self.a * s1, self.b * s2, 0.0),
            v_ref: Vec3::new(self.a * w * c1, 2.0 * self.b * w * c2, 0.0),
            psi_ref: 0.0,
            a_ff: Vec3::new(-self.a * w * w * s1, -4.0 * self.b * w * w * s2, 0.0),
        }
    }
}

/// Straight back-and-forth pass at constant speed.
///
/// The track runs through `(e1_fix, 0)` along the horizontal direction at
/// angle `heading` from north (π/2 is along e2), between `-span` and `+span`,
/// starting at `-span`. At the turn points the velocity reverses instantly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Transect {
    pub e1_fix: f64,
    pub depth: f64,
    pub speed: f64,
    pub span: f64,
    pub heading: f64,
}

impl Default for Transect {
    fn default() -> Self {
        Self { e1_fix: 0.2, depth: -1.9, speed: 0.5, span: 1.5, heading: std::f64::consts::FRAC_PI_2 }
    }
}

impl Transect {
    pub fn validate(&self) -> Result<()> {
        if self.speed > 0.0 && self.span > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument("transect speed and span must be positive".into()))
        }
    }

    /// Duration of one pass from one end to the other.
    pub fn leg_duration(&self) -> f64 {
        2.0 * self.span / self.speed
    }
}

impl Trajectory for Transect {
    fn sample(&self, t: f64) -> TrajectoryPoint {
        let leg = self.leg_duration();
        let tau = t.rem_euclid(2.0 * leg);
        let (along, dir) = if tau < leg {
            (-self.span + self.speed * tau, 1.0)
        } else {
            (self.span - self.speed * (tau - leg), -1.0)
        };
        let (s, c) = self.heading.sin_cos();
        let axis = Vec3::new(c, s, 0.0);
        // Offset perpendicular to the track; for the e2 heading this is +e1.
        let normal = Vec3::new(s, -c, 0.0);
        TrajectoryPoint {
            p_ref: normal * self.e1_fix + axis * along + Vec3::new(0.0, 0.0, self.depth),
            v_ref: axis * (dir * self.speed),
            psi_ref: 0.0,
            a_ff: Vec3::zeros(),
        }
    }
}

/// Serializable choice of trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrajectorySpec {
    Hover(Hover),
    Lemniscate(Lemniscate),
    Transect(Transect),
}

impl Trajectory for TrajectorySpec {
    fn sample(&self, t: f64) -> TrajectoryPoint {
        match self {
            TrajectorySpec::Hover(h) => h.sample(t),
            TrajectorySpec::Lemniscate(l) => l.sample(t),
            TrajectorySpec::Transect(tr) => tr.sample(t),
        }
    }
}

pub fn trajectory_hover(p0: Vec3) -> Hover {
    Hover { p0 }
}

pub fn trajectory_lemniscate(center: Vec3, a: f64, b: f64, period: f64) -> Result<Lemniscate> {
    let l = Lemniscate { center, a, b, period, phase: 0.0 };
    l.validate()?;
    Ok(l)
}

pub fn trajectory_transect(e1_fix: f64, depth: f64, speed: f64, span: f64) -> Result<Transect> {
    let t = Transect { e1_fix, depth, speed, span, ..Default::default() };
    t.validate()?;
    Ok(t)
}
