//! Synthetic ground-truth downwash field.
//!
//! The force on the follower is built directly in the equivariant form
//! `Rᵀ [α ĉ_r ; γ]` from invariant quantities, so it commutes with the
//! `H_A` action exactly. An optional inertial-frame perturbation breaks that
//! symmetry by a controlled amount. All constants are made up; they only need
//! to produce disturbances that matter relative to the control authority.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{feature_map, FeatureMode, FrameRotation, InteractionState, Vec3, EPS_NORM};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldParams {
    /// Peak static down-force, m/s².
    pub a_down: f64,
    /// Velocity-coupled vertical term, m/s² per m/s.
    pub a_lift: f64,
    /// Radial term, m/s².
    pub a_rad: f64,
    /// Lateral length scale, m.
    pub sigma_r: f64,
    /// Depth below the leader where the vertical profile peaks, m.
    pub z_near: f64,
    /// Depth beyond which the field vanishes, m.
    pub z_far: f64,
    /// Amplitude of the symmetry-breaking perturbation (unitless).
    pub eps_sym: f64,
    /// Gain on the leader's planar speed; 0 keeps the field independent of v^A.
    pub leader_speed_gain: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            a_down: 2.0,
            a_lift: 1.5,
            a_rad: 0.8,
            sigma_r: 0.35,
            z_near: 0.3,
            z_far: 2.0,
            eps_sym: 0.0,
            leader_speed_gain: 0.0,
        }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        let amps = [self.a_down, self.a_lift, self.a_rad, self.eps_sym, self.leader_speed_gain];
        if !amps.iter().all(|a| *a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument("field amplitudes must be non-negative".into()));
        }
        if !(self.sigma_r > 0.0) {
            return Err(Error::InvalidArgument("sigma_r must be positive".into()));
        }
        if !(self.z_near > 0.0 && self.z_near < self.z_far) {
            return Err(Error::InvalidArgument("need 0 < z_near < z_far".into()));
        }
        Ok(())
    }

    /// Force actually felt by the follower (perturbation included).
    pub fn force(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec3 {
        perturbed_force(x, r_ma, self)
    }

    /// Bound on `‖true_force‖` for planar follower speeds up to `s_max`
    /// (leader-speed coupling disabled).
    pub fn force_bound(&self, s_max: f64) -> f64 {
        self.a_down + self.a_lift * s_max + self.a_rad * (1.0 + 2.0 * s_max)
    }
}

impl crate::learning::ForcePredictor for FieldParams {
    fn predict_force(&self, x: &InteractionState, r_ma: &FrameRotation) -> Vec3 {
        self.force(x, r_ma)
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Vertical profile over the leader-frame down offset `z = [RΔp]₃`.
///
/// Zero unless the follower is below the leader (`z < 0`); rises to 1 at a
/// depth of `z_near` and decays back to 0 at `z_far`.
pub fn vertical_profile(z: f64, params: &FieldParams) -> f64 {
    let depth = -z;
    if depth <= 0.0 || depth >= params.z_far {
        0.0
    } else if depth < params.z_near {
        smoothstep(depth / params.z_near)
    } else {
        1.0 - smoothstep((depth - params.z_near) / (params.z_far - params.z_near))
    }
}

/// Radial shape of the velocity-coupled vertical term: zero on the axis,
/// peak 1 at `r = √2 σ`, wider than the static core.
pub fn wake_profile(r: f64, sigma_r: f64) -> f64 {
    let x = r / (std::f64::consts::SQRT_2 * sigma_r);
    x * (0.5 * (1.0 - x * x)).exp()
}

/// The symmetric part of the field.
pub fn true_force(x: &InteractionState, r_ma: &FrameRotation, params: &FieldParams) -> Vec3 {
    let h = feature_map(x, r_ma, FeatureMode::Full);
    let r = h.planar_dp_norm();
    let s = h.planar_vb_norm();
    let c = h.cos_angle();
    let w = vertical_profile(h.dp_down(), params);
    if w == 0.0 {
        return Vec3::zeros();
    }
    let envelope = (-r * r / (2.0 * params.sigma_r * params.sigma_r)).exp();
    // Extra down-force ahead of the leader's axis, an updraft in its wake.
    let gamma = w * (params.a_down * envelope + params.a_lift * c * s * wake_profile(r, params.sigma_r));
    // Positive is toward the leader's axis: inward near the axis, outward
    // further out; the inward zone widens and strengthens with speed.
    let alpha = params.a_rad
        * w
        * (r / params.sigma_r)
        * envelope
        * (2.0 * (1.0 + s) * envelope - 1.0);
    let dp_body = r_ma.to_body(&x.delta_p);
    let (ux, uy) = if r < EPS_NORM { (0.0, 0.0) } else { (dp_body.x / r, dp_body.y / r) };
    let mut f = r_ma.to_inertial(&Vec3::new(alpha * ux, alpha * uy, gamma));
    if params.leader_speed_gain > 0.0 {
        let va = h.planar_va_norm().unwrap_or(0.0);
        f *= 1.0 + params.leader_speed_gain * va;
    }
    f
}

/// [`true_force`] plus an inertial-frame term that breaks `H_A` symmetry.
pub fn perturbed_force(x: &InteractionState, r_ma: &FrameRotation, params: &FieldParams) -> Vec3 {
    let f = true_force(x, r_ma, params);
    if params.eps_sym == 0.0 {
        return f;
    }
    let dp_body = r_ma.to_body(&x.delta_p);
    let r = (dp_body.x * dp_body.x + dp_body.y * dp_body.y).sqrt();
    let w = vertical_profile(dp_body.z, params);
    let envelope = (-r * r / (2.0 * params.sigma_r * params.sigma_r)).exp();
    let phi_g = if x.delta_p.x.hypot(x.delta_p.y) < EPS_NORM {
        0.0
    } else {
        x.delta_p.y.atan2(x.delta_p.x)
    };
    let amp = params.eps_sym * params.a_down * envelope * w;
    f + Vec3::new(amp * phi_g.cos(), amp * (2.0 * phi_g).sin(), 0.0)
}

/// Adds i.i.d. zero-mean Gaussian noise to each axis.
pub fn noisy_accel_with<R: Rng + ?Sized>(a_true: &Vec3, sigma_noise: f64, rng: &mut R) -> Vec3 {
    if sigma_noise == 0.0 {
        return *a_true;
    }
    let mut out = *a_true;
    for c in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *c += sigma_noise * z;
    }
    out
}

/// [`noisy_accel_with`] on a fresh generator seeded with `seed`.
pub fn noisy_accel(a_true: &Vec3, sigma_noise: f64, seed: u64) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    noisy_accel_with(a_true, sigma_noise, &mut rng)
}
