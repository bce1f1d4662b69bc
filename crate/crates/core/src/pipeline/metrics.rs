//! Tracking-error statistics of a flight log.

use serde::{Deserialize, Serialize};

use super::log::FlightLog;
use crate::geometry::Vec3;

/// Mean and max of one error channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub max: f64,
    /// Mean of the squared error.
    pub mean_sq: f64,
}

/// Percentiles of one error channel, for distribution plots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet<T> {
    pub lateral: T,
    pub vertical: T,
    pub total: T,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub position: ChannelSet<ErrorStats>,
    pub velocity: ChannelSet<ErrorStats>,
    pub position_percentiles: ChannelSet<Percentiles>,
    pub velocity_percentiles: ChannelSet<Percentiles>,
    #[serde(skip)]
    pub series: Vec<ErrorSample>,
}

impl TrackingMetrics {
    pub fn from_log(log: &FlightLog) -> Self {
        tracking_metrics(log)
    }
}

fn split(e: &Vec3) -> [f64; 3] {
    let lat = (e.x * e.x + e.y * e.y).sqrt();
    [lat, e.z.abs(), e.norm()]
}

fn stats(values: &[f64]) -> ErrorStats {
    if values.is_empty() {
        return ErrorStats::default();
    }
    let n = values.len() as f64;
    ErrorStats {
        mean: values.iter().sum::<f64>() / n,
        max: values.iter().copied().fold(0.0, f64::max),
        mean_sq: values.iter().map(|v| v * v).sum::<f64>() / n,
    }
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn percentiles(values: &[f64]) -> Percentiles {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Percentiles {
        p05: percentile(&s, 0.05),
        p25: percentile(&s, 0.25),
        p50: percentile(&s, 0.5),
        p75: percentile(&s, 0.75),
        p95: percentile(&s, 0.95),
    }
}

fn channels(errors: &[Vec3]) -> (ChannelSet<ErrorStats>, ChannelSet<Percentiles>) {
    let mut cols: [Vec<f64>; 3] = Default::default();
    for e in errors {
        for (c, v) in cols.iter_mut().zip(split(e)) {
            c.push(v);
        }
    }
    (
        ChannelSet { lateral: stats(&cols[0]), vertical: stats(&cols[1]), total: stats(&cols[2]) },
        ChannelSet {
            lateral: percentiles(&cols[0]),
            vertical: percentiles(&cols[1]),
            total: percentiles(&cols[2]),
        },
    )
}

/// Follower errors against its reference, split into lateral, vertical and 3D.
pub fn tracking_metrics(log: &FlightLog) -> TrackingMetrics {
    let series: Vec<ErrorSample> = log
        .rows
        .iter()
        .map(|r| ErrorSample {
            t: r.t,
            position: r.state_b.p - r.ref_b.p_ref,
            velocity: r.state_b.v - r.ref_b.v_ref,
        })
        .collect();
    let pos: Vec<Vec3> = series.iter().map(|s| s.position).collect();
    let vel: Vec<Vec3> = series.iter().map(|s| s.velocity).collect();
    let (position, position_percentiles) = channels(&pos);
    let (velocity, velocity_percentiles) = channels(&vel);
    TrackingMetrics { position, velocity, position_percentiles, velocity_percentiles, series }
}

/// Relative reduction `1 - new/old`.
pub fn reduction(old: f64, new: f64) -> f64 {
    if old == 0.0 {
        0.0
    } else {
        1.0 - new / old
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::TrajectoryPoint;
    use crate::dynamics::{ControlInput, VehicleState};
    use crate::pipeline::log::FlightRow;

    fn log_with_offset(offset: Vec3, n: usize) -> FlightLog {
        let rows = (0..n)
            .map(|k| {
                let p = Vec3::new(k as f64 * 0.1, 0.0, -1.0);
                FlightRow {
                    t: k as f64 * 0.02,
                    state_a: VehicleState::at_rest(Vec3::zeros()),
                    state_b: VehicleState::at_rest(p + offset),
                    ref_b: TrajectoryPoint::hover(p),
                    u_fb: ControlInput::zero(),
                    u_cmd: ControlInput::zero(),
                    f_pred: Vec3::zeros(),
                    a_meas: Vec3::zeros(),
                    f_true: None,
                }
            })
            .collect();
        FlightLog { dt: 0.02, rows }
    }

    #[test]
    fn perfect_tracking_is_zero() {
        let m = tracking_metrics(&log_with_offset(Vec3::zeros(), 20));
        assert_eq!(m.position.total, ErrorStats::default());
        assert_eq!(m.velocity.total.max, 0.0);
        assert_eq!(m.position_percentiles.total.p95, 0.0);
    }

    #[test]
    fn constant_lateral_offset() {
        let m = tracking_metrics(&log_with_offset(Vec3::new(0.1, 0.0, 0.0), 20));
        assert!((m.position.lateral.mean - 0.1).abs() < 1e-15);
        assert_eq!(m.position.vertical.mean, 0.0);
        assert!((m.position.total.max - 0.1).abs() < 1e-15);
    }

    #[test]
    fn squared_components_recombine() {
        let mut log = log_with_offset(Vec3::zeros(), 50);
        for (k, r) in log.rows.iter_mut().enumerate() {
            let s = k as f64;
            r.state_b.p += Vec3::new(0.01 * s.sin(), -0.02 * s.cos(), 0.03 * (0.3 * s).sin());
        }
        let m = tracking_metrics(&log);
        let lhs = m.position.lateral.mean_sq + m.position.vertical.mean_sq;
        assert!((lhs - m.position.total.mean_sq).abs() < 1e-12);
    }

    #[test]
    fn percentile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&s, 0.5), 2.0);
        assert_eq!(percentile(&s, 0.125), 0.5);
        assert_eq!(percentile(&[], 0.5), 0.0);
    }

    #[test]
    fn reduction_ratio() {
        assert!((reduction(2.0, 1.5) - 0.25).abs() < 1e-15);
        assert_eq!(reduction(0.0, 1.0), 0.0);
    }
}
