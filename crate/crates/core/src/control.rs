//! LQR synthesis and the (compensated) state-feedback law.

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    linear_system, ControlInput, StateMatrix, StateVector, VehicleState, INPUT_DIM,
    STATE_DIM,
};
use crate::error::{Error, Result};
use crate::geometry::{wrap_pi, Vec3};

pub const CARE_TOL: f64 = 1e-9;
pub const CARE_MAX_ITER: usize = 200;

pub type GainMatrix = SMatrix<f64, INPUT_DIM, STATE_DIM>;

/// Diagonal LQR weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub q_diag: [f64; STATE_DIM],
    pub r_diag: [f64; INPUT_DIM],
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            q_diag: [20.0, 20.0, 20.0, 6.0, 6.0, 6.0, 4.0],
            r_diag: [1.0; INPUT_DIM],
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if self.q_diag.iter().chain(self.r_diag.iter()).all(|w| *w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("LQR weights must be strictly positive".into()))
        }
    }

    pub fn q(&self) -> StateMatrix {
        StateMatrix::from_diagonal(&StateVector::from_column_slice(&self.q_diag))
    }

    pub fn r(&self) -> SMatrix<f64, INPUT_DIM, INPUT_DIM> {
        SMatrix::<f64, INPUT_DIM, INPUT_DIM>::from_diagonal(&nalgebra::Vector4::from_column_slice(
            &self.r_diag,
        ))
    }
}

/// Reference state with an acceleration feedforward term.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub p_ref: Vec3,
    pub v_ref: Vec3,
    pub psi_ref: f64,
    /// Analytic reference acceleration, added to the feedback command.
    pub a_ff: Vec3,
}

impl TrajectoryPoint {
    pub fn hover(p: Vec3) -> Self {
        Self { p_ref: p, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LqrGains {
    pub k: GainMatrix,
    pub p: StateMatrix,
}

impl LqrGains {
    /// Solves the CARE for the plant with the given weights.
    pub fn design(weights: &CostWeights) -> Result<Self> {
        weights.validate()?;
        let (a, b, _) = linear_system();
        let q = weights.q();
        let r = weights.r();
        let p = solve_care(
            &to_dyn(&a),
            &to_dyn(&b),
            &to_dyn(&q),
            &to_dyn(&r),
            &to_dyn(&plant_seed_gain()),
        )?;
        let p = StateMatrix::from_iterator(p.iter().copied());
        let r_inv = r.try_inverse().ok_or(Error::Singular("input weight"))?;
        let k = r_inv * b.transpose() * p;
        Ok(Self { k, p })
    }

    /// `u = a_ff - K (x - x_r)`, yaw error wrapped, not clamped.
    pub fn feedback_raw(&self, x: &VehicleState, r: &TrajectoryPoint) -> ControlInput {
        let mut err = StateVector::zeros();
        for i in 0..3 {
            err[i] = x.p[i] - r.p_ref[i];
            err[i + 3] = x.v[i] - r.v_ref[i];
        }
        err[6] = wrap_pi(x.psi - r.psi_ref);
        let mut u = ControlInput::from_vector(&(-self.k * err));
        u.a += r.a_ff;
        u
    }

    pub fn feedback(&self, x: &VehicleState, r: &TrajectoryPoint, a_max: f64) -> ControlInput {
        self.feedback_raw(x, r).clamped(a_max)
    }

    /// Feedback with the predicted exogenous force subtracted from the
    /// acceleration channels before clamping.
    pub fn compensated_feedback(
        &self,
        x: &VehicleState,
        r: &TrajectoryPoint,
        f_hat: &Vec3,
        a_max: f64,
    ) -> ControlInput {
        let mut u = self.feedback_raw(x, r);
        u.a -= f_hat;
        u.clamped(a_max)
    }

    /// Max-abs residual of the CARE at the stored `P`.
    pub fn riccati_residual(&self, weights: &CostWeights) -> f64 {
        let (a, b, _) = linear_system();
        care_residual(&to_dyn(&a), &to_dyn(&b), &to_dyn(&weights.q()), &to_dyn(&weights.r()), &to_dyn(&self.p))
    }
}

fn to_dyn<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// Per-axis PD gains placing poles at -1.5 and -2 on every translational
/// axis and at -2 on yaw.
pub fn plant_seed_gain() -> GainMatrix {
    let mut k = GainMatrix::zeros();
    for i in 0..3 {
        k[(i, i)] = 3.0;
        k[(i, i + 3)] = 3.5;
    }
    k[(3, 6)] = 2.0;
    k
}

/// Max-abs entry of `AᵀP + PA - PBR⁻¹BᵀP + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let r_inv = match r.clone().try_inverse() {
        Some(m) => m,
        None => return f64::INFINITY,
    };
    let res = a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q;
    res.abs().max()
}

/// Solves `AᵀX + XA = -M` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X
    let lhs = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-m).as_slice());
    let sol = lhs.lu().solve(&rhs).ok_or(Error::Singular("Lyapunov equation"))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Newton–Kleinman iteration for the continuous algebraic Riccati equation,
/// seeded with a stabilizing gain.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    seed_gain: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::InvalidArgument("CARE operand shapes are inconsistent".into()));
    }
    if seed_gain.shape() != (m, n) {
        return Err(Error::DimensionMismatch { expected: m * n, got: seed_gain.len() });
    }
    let r_inv = r.clone().try_inverse().ok_or(Error::Singular("input weight"))?;
    let mut k = seed_gain.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..CARE_MAX_ITER {
        let closed = a - b * &k;
        let rhs = q + k.transpose() * r * &k;
        let p = solve_lyapunov(&closed, &rhs)?;
        if p.clone().cholesky().is_none() {
            return Err(Error::NonStabilizingSeed);
        }
        residual = care_residual(a, b, q, r, &p);
        if residual < CARE_TOL {
            return Ok(p);
        }
        k = &r_inv * b.transpose() * &p;
    }
    Err(Error::CareNotConverged { iterations: CARE_MAX_ITER, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, DEFAULT_DT};

    fn double_integrator() -> (DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
    }

    #[test]
    fn analytic_double_integrator() {
        let (a, b) = double_integrator();
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::identity(1, 1);
        let seed = DMatrix::from_row_slice(1, 2, &[3.0, 3.5]);
        let p = solve_care(&a, &b, &q, &r, &seed).unwrap();
        let s3 = 3f64.sqrt();
        let expected = DMatrix::from_row_slice(2, 2, &[s3, 1.0, 1.0, s3]);
        assert!((&p - expected).abs().max() < 1e-9);
        let k = b.transpose() * &p;
        assert!((k[(0, 0)] - 1.0).abs() < 1e-9 && (k[(0, 1)] - s3).abs() < 1e-9);
    }

    #[test]
    fn riccati_is_homogeneous_in_the_weights() {
        let (a, b) = double_integrator();
        let seed = DMatrix::from_row_slice(1, 2, &[3.0, 3.5]);
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let r = DMatrix::identity(1, 1) * 0.7;
        let p1 = solve_care(&a, &b, &q, &r, &seed).unwrap();
        let alpha = 3.5;
        let p2 = solve_care(&a, &b, &(&q * alpha), &(&r * alpha), &seed).unwrap();
        assert!((&p1 * alpha - &p2).abs().max() < 1e-8);
        let k1 = r.clone().try_inverse().unwrap() * b.transpose() * &p1;
        let k2 = (&r * alpha).try_inverse().unwrap() * b.transpose() * &p2;
        assert!((k1 - k2).abs().max() < 1e-9);
    }

    #[test]
    fn destabilizing_seed_is_reported() {
        let (a, b) = double_integrator();
        let seed = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
        let err = solve_care(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1), &seed)
            .unwrap_err();
        assert!(matches!(err, Error::NonStabilizingSeed | Error::Singular(_)));
    }

    #[test]
    fn plant_gains_satisfy_care() {
        let w = CostWeights::default();
        let g = LqrGains::design(&w).unwrap();
        assert!(g.riccati_residual(&w) < 1e-8);
        assert!((g.p - g.p.transpose()).abs().max() < 1e-9);
        assert!(g.p.cholesky().is_some());
    }

    #[test]
    fn feedback_signs() {
        let g = LqrGains::design(&CostWeights::default()).unwrap();
        let r = TrajectoryPoint::hover(Vec3::new(0.0, 0.0, -2.0));
        let on_ref = VehicleState::at_rest(r.p_ref);
        assert_eq!(g.feedback(&on_ref, &r, 8.0), ControlInput::zero());
        let off = VehicleState::at_rest(r.p_ref + Vec3::new(1.0, 0.0, 0.0));
        assert!(g.feedback(&off, &r, 8.0).a.x < 0.0);
        let f = Vec3::new(0.1, -0.2, 0.3);
        assert_eq!(g.compensated_feedback(&off, &r, &Vec3::zeros(), 8.0), g.feedback(&off, &r, 8.0));
        let comp = g.compensated_feedback(&off, &r, &f, 8.0);
        assert!((comp.a - (g.feedback(&off, &r, 8.0).a - f)).norm() < 1e-15);
    }

    #[test]
    fn yaw_error_is_wrapped() {
        let g = LqrGains::design(&CostWeights::default()).unwrap();
        let r = TrajectoryPoint { psi_ref: 3.1, ..Default::default() };
        let x = VehicleState { psi: -3.1, ..Default::default() };
        // Shortest way round is +0.083 rad of error, so the command is negative.
        assert!(g.feedback(&x, &r, 8.0).psi_rate < 0.0);
        assert!(g.feedback(&x, &r, 8.0).psi_rate.abs() < 1.0);
    }

    #[test]
    fn hover_with_exact_compensation_holds_position() {
        let g = LqrGains::design(&CostWeights::default()).unwrap();
        let r = TrajectoryPoint::hover(Vec3::new(0.0, 0.0, -1.5));
        let f = Vec3::new(0.0, 0.0, 2.0);
        let mut x = VehicleState::at_rest(r.p_ref);
        for _ in 0..500 {
            let u = g.compensated_feedback(&x, &r, &f, 8.0);
            x = step(&x, &u, &f, DEFAULT_DT).unwrap();
        }
        assert!((x.p - r.p_ref).norm() < 1e-9);
    }
}
