//! Per-step flight records.

use std::io::Write;

use crate::control::TrajectoryPoint;
use crate::dynamics::{ControlInput, VehicleState};
use crate::error::Result;
use crate::geometry::{InteractionState, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlightRow {
    pub t: f64,
    pub state_a: VehicleState,
    pub state_b: VehicleState,
    pub ref_b: TrajectoryPoint,
    /// Follower feedback command before compensation and clamping.
    pub u_fb: ControlInput,
    /// Command actually applied to the follower.
    pub u_cmd: ControlInput,
    pub f_pred: Vec3,
    pub a_meas: Vec3,
    /// Ground-truth force; only known in simulation.
    pub f_true: Option<Vec3>,
}

impl FlightRow {
    pub fn interaction(&self) -> InteractionState {
        InteractionState::from_positions(&self.state_a.p, &self.state_b.p, self.state_a.v, self.state_b.v)
    }

    /// Prediction that was effectively subtracted from the feedback, which
    /// differs from `f_pred` only when the command saturated.
    pub fn effective_compensation(&self) -> Vec3 {
        self.u_fb.a - self.u_cmd.a
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlightLog {
    pub dt: f64,
    pub rows: Vec<FlightRow>,
}

pub const FLIGHT_LOG_HEADER: &str = concat!(
    "t,",
    "a_pn,a_pe,a_pd,a_vn,a_ve,a_vd,a_psi,",
    "b_pn,b_pe,b_pd,b_vn,b_ve,b_vd,b_psi,",
    "ref_pn,ref_pe,ref_pd,ref_vn,ref_ve,ref_vd,ref_psi,",
    "ufb_an,ufb_ae,ufb_ad,ufb_psi_rate,",
    "ucmd_an,ucmd_ae,ucmd_ad,ucmd_psi_rate,",
    "fpred_n,fpred_e,fpred_d,",
    "ameas_n,ameas_e,ameas_d,",
    "ftrue_n,ftrue_e,ftrue_d"
);

impl FlightLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.rows.len() as f64 * self.dt
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FLIGHT_LOG_HEADER}")?;
        for r in &self.rows {
            let mut fields: Vec<String> = Vec::with_capacity(39);
            fields.push(r.t.to_string());
            for s in [&r.state_a, &r.state_b] {
                fields.extend(s.p.iter().chain(s.v.iter()).map(f64::to_string));
                fields.push(s.psi.to_string());
            }
            fields.extend(r.ref_b.p_ref.iter().chain(r.ref_b.v_ref.iter()).map(f64::to_string));
            fields.push(r.ref_b.psi_ref.to_string());
            for u in [&r.u_fb, &r.u_cmd] {
                fields.extend(u.a.iter().map(f64::to_string));
                fields.push(u.psi_rate.to_string());
            }
            fields.extend(r.f_pred.iter().chain(r.a_meas.iter()).map(f64::to_string));
            match r.f_true {
                Some(f) => fields.extend(f.iter().map(f64::to_string)),
                None => fields.extend(std::iter::repeat(String::new()).take(3)),
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
