//! Force predictions on a regular grid around the leader, for plotting.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameRotation, InteractionState, Vec3};
use crate::learning::ForcePredictor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    /// Horizontal plane at a fixed depth below the leader; axes north, east.
    TopDown,
    /// Vertical north/down plane at a fixed east offset; axes north, down.
    Sagittal,
}

impl FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top_down" | "top-down" => Ok(Plane::TopDown),
            "sagittal" => Ok(Plane::Sagittal),
            other => Err(Error::InvalidArgument(format!("unknown plane {other:?}"))),
        }
    }
}

/// Grid over follower offsets from the leader (`p_B - p_A`, NED).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub plane: Plane,
    pub u_range: [f64; 2],
    pub v_range: [f64; 2],
    pub nu: usize,
    pub nv: usize,
    /// Depth below the leader for `TopDown`, east offset for `Sagittal`.
    pub fixed: f64,
    pub v_probe: Vec3,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::top_down()
    }
}

impl GridSpec {
    pub fn top_down() -> Self {
        Self {
            plane: Plane::TopDown,
            u_range: [-1.5, 1.5],
            v_range: [-1.5, 1.5],
            nu: 61,
            nv: 61,
            fixed: 1.0,
            v_probe: Vec3::new(0.5, 0.0, 0.0),
        }
    }

    pub fn sagittal() -> Self {
        Self {
            plane: Plane::Sagittal,
            u_range: [-1.5, 1.5],
            v_range: [0.0, 2.5],
            nu: 61,
            nv: 51,
            fixed: 0.1,
            v_probe: Vec3::new(0.5, 0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 || self.nv == 0 || !(self.u_range[0] <= self.u_range[1] && self.v_range[0] <= self.v_range[1]) {
            return Err(Error::InvalidArgument("grid needs non-empty ordered ranges".into()));
        }
        Ok(())
    }

    fn axis(range: [f64; 2], n: usize, k: usize) -> f64 {
        if n == 1 {
            range[0]
        } else {
            range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64
        }
    }

    /// Follower offset from the leader at grid index `(i, j)`.
    pub fn offset(&self, i: usize, j: usize) -> Vec3 {
        let u = Self::axis(self.u_range, self.nu, i);
        let v = Self::axis(self.v_range, self.nv, j);
        match self.plane {
            Plane::TopDown => Vec3::new(u, v, self.fixed),
            Plane::Sagittal => Vec3::new(u, self.fixed, v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub u: f64,
    pub v: f64,
    pub offset: Vec3,
    pub force: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    /// Row-major over `u`, then `v`.
    pub points: Vec<GridPoint>,
}

pub const FIELD_GRID_HEADER: &str = "u,v,off_n,off_e,off_d,f_n,f_e,f_d";

impl FieldGrid {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FIELD_GRID_HEADER}")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.u, p.v, p.offset.x, p.offset.y, p.offset.z, p.force.x, p.force.y, p.force.z
            )?;
        }
        Ok(())
    }
}

/// Evaluates `model` with a hovering, level leader and the follower at each
/// grid offset moving at `spec.v_probe`.
pub fn export_field_grid(model: &dyn ForcePredictor, spec: &GridSpec) -> Result<FieldGrid> {
    spec.validate()?;
    let frame = FrameRotation::identity();
    let mut points = Vec::with_capacity(spec.nu * spec.nv);
    for i in 0..spec.nu {
        for j in 0..spec.nv {
            let offset = spec.offset(i, j);
            let x = InteractionState::new(-offset, Vec3::zeros(), spec.v_probe);
            points.push(GridPoint {
                u: GridSpec::axis(spec.u_range, spec.nu, i),
                v: GridSpec::axis(spec.v_range, spec.nv, j),
                offset,
                force: model.predict_force(&x, &frame),
            });
        }
    }
    Ok(FieldGrid { spec: spec.clone(), points })
}
