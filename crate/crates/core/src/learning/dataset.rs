//! Training pairs `(x, f_label)` and their CSV form.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{InteractionState, Vec3};

pub const DATASET_HEADER: &str =
    "t,dp_n,dp_e,dp_d,va_n,va_e,va_d,vb_n,vb_e,vb_d,f_n,f_e,f_d,stage";
pub const DELTA_P_CONVENTION: &str = "# delta_p = p_leader - p_follower; NED; SI units";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetRow {
    /// Flight time within the row's stage, s.
    pub t: f64,
    pub x: InteractionState,
    pub f_label: Vec3,
    pub stage: u8,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
}

/// Residual force implied by a measured acceleration.
///
/// The applied command was `u_fb - f_pred_prev`, so whatever acceleration is
/// left over is the exogenous force.
pub fn compute_label(a_meas: &Vec3, u_fb: &Vec3, f_pred_prev: &Vec3) -> Vec3 {
    a_meas - u_fb + f_pred_prev
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>) -> Result<Self> {
        for r in &rows {
            if r.stage > 2 {
                return Err(Error::InvalidArgument(format!("stage {} out of range", r.stage)));
            }
            if !(r.t.is_finite() && r.x.is_finite() && r.f_label.iter().all(|c| c.is_finite())) {
                return Err(Error::NonFinite { what: "dataset row" });
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.rows.extend_from_slice(&other.rows);
    }

    pub fn stages(&self) -> Vec<u8> {
        let mut s: Vec<u8> = self.rows.iter().map(|r| r.stage).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Rows whose in-stage flight time is below `seconds_per_stage`.
    pub fn truncate_per_stage(&self, seconds_per_stage: f64) -> Dataset {
        Dataset {
            rows: self.rows.iter().filter(|r| r.t < seconds_per_stage).copied().collect(),
        }
    }

    /// Flight time represented, summed over stages.
    pub fn flight_time(&self, row_period: f64) -> f64 {
        self.rows.len() as f64 * row_period
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{DELTA_P_CONVENTION}")?;
        writeln!(w, "{DATASET_HEADER}")?;
        for r in &self.rows {
            let x = r.x.to_array();
            write!(w, "{}", r.t)?;
            for v in x.iter().chain(r.f_label.iter()) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", r.stage)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != DATASET_HEADER {
                    return Err(Error::Csv { line: lineno, reason: "unexpected header".into() });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 14 {
                return Err(Error::Csv {
                    line: lineno,
                    reason: format!("expected 14 fields, found {}", fields.len()),
                });
            }
            let mut vals = [0.0; 13];
            for (k, f) in fields[..13].iter().enumerate() {
                vals[k] = f.parse().map_err(|_| Error::Csv {
                    line: lineno,
                    reason: format!("bad number {f:?}"),
                })?;
            }
            let stage: u8 = fields[13].parse().map_err(|_| Error::Csv {
                line: lineno,
                reason: format!("bad stage {:?}", fields[13]),
            })?;
            let mut x = [0.0; 9];
            x.copy_from_slice(&vals[1..10]);
            rows.push(DatasetRow {
                t: vals[0],
                x: InteractionState::from_array(&x),
                f_label: Vec3::new(vals[10], vals[11], vals[12]),
                stage,
            });
        }
        if !saw_header {
            return Err(Error::Csv { line: 0, reason: "missing header".into() });
        }
        Dataset::new(rows)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, stage: u8) -> DatasetRow {
        DatasetRow {
            t,
            x: InteractionState::new(
                Vec3::new(0.1, -0.2, -0.6),
                Vec3::zeros(),
                Vec3::new(0.5, 0.0, 1e-17),
            ),
            f_label: Vec3::new(0.01, 1.0 / 3.0, 2.5),
            stage,
        }
    }

    #[test]
    fn label_identities() {
        let u = Vec3::new(0.3, -0.1, 0.2);
        let f = Vec3::new(0.0, 0.4, 1.7);
        assert_eq!(compute_label(&u, &u, &Vec3::zeros()), Vec3::zeros());
        let a = u - f + f;
        assert!((compute_label(&a, &u, &f) - f).norm() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = Dataset::new(vec![row(0.0, 0), row(0.1, 1), row(0.2, 2)]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap() == DATASET_HEADER);
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn csv_errors() {
        assert!(Dataset::read_csv("a,b\n".as_bytes()).is_err());
        let bad = format!("{DATASET_HEADER}\n1,2,3\n");
        assert!(matches!(Dataset::read_csv(bad.as_bytes()), Err(Error::Csv { line: 2, .. })));
        assert!(Dataset::read_csv("".as_bytes()).is_err());
    }

    #[test]
    fn stage_range_is_enforced() {
        assert!(Dataset::new(vec![row(0.0, 3)]).is_err());
    }

    #[test]
    fn truncation_keeps_early_rows_of_each_stage() {
        let ds = Dataset::new(vec![row(0.0, 0), row(5.0, 0), row(1.0, 1), row(9.0, 1)]).unwrap();
        let cut = ds.truncate_per_stage(2.0);
        assert_eq!(cut.len(), 2);
        assert_eq!(cut.stages(), vec![0, 1]);
    }
}
