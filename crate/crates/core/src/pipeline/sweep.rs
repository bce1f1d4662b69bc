//! Validation RMSE as a function of how much flight data each model saw.

use serde::{Deserialize, Serialize};

use super::collect::derive_seed;
use crate::error::{Error, Result};
use crate::geometry::FeatureMode;
use crate::learning::{evaluate, train, Dataset, Model, ModelKind, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Total flight-time budgets, minutes, split evenly across stages.
    pub budgets_min: Vec<f64>,
    pub kinds: Vec<ModelKind>,
    pub n_seeds: usize,
    pub mode: FeatureMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            budgets_min: vec![5.0, 10.0, 15.0],
            kinds: ModelKind::ALL.to_vec(),
            n_seeds: 5,
            mode: FeatureMode::NearHover,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub budget_min: f64,
    pub kind: ModelKind,
    pub train_rows: usize,
    pub rmse: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub validation_rows: usize,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, budget_min: f64, kind: ModelKind) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.kind == kind && (c.budget_min - budget_min).abs() < 1e-9)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "budget_min,kind,train_rows,mean_rmse,std_rmse,median_rmse,seeds")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.budget_min,
                c.kind,
                c.train_rows,
                c.mean,
                c.std,
                c.median,
                c.rmse.len()
            )?;
        }
        Ok(())
    }
}

/// Mean, sample standard deviation and median.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    let median = if s.len() % 2 == 0 { 0.5 * (s[mid - 1] + s[mid]) } else { s[mid] };
    (mean, std, median)
}

struct Trial {
    cell: usize,
    seed: u64,
}

/// Retrains every kind from scratch on each budget-truncated copy of
/// `full` (stage-major, in-stage time truncated) and scores it on
/// `validation`. Trials run on scoped threads; results do not depend on the
/// thread count.
pub fn sample_efficiency_sweep(
    full: &Dataset,
    validation: &Dataset,
    stage_duration: f64,
    config: &SweepConfig,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<SweepTable> {
    if config.n_seeds == 0 || config.kinds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one seed and one model kind".into()));
    }
    if validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let stages = full.stages().len().max(1) as f64;
    let available_min = stage_duration * stages / 60.0;
    let mut subsets = Vec::with_capacity(config.budgets_min.len());
    for &b in &config.budgets_min {
        if !(b > 0.0) || b > available_min + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "budget {b} min outside (0, {available_min}] min of collected data"
            )));
        }
        let subset = full.truncate_per_stage(b * 60.0 / stages);
        if subset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        subsets.push(subset);
    }

    let mut cells = Vec::new();
    let mut trials = Vec::new();
    for (bi, &budget) in config.budgets_min.iter().enumerate() {
        for (ki, &kind) in config.kinds.iter().enumerate() {
            let idx = cells.len();
            cells.push(SweepCell {
                budget_min: budget,
                kind,
                train_rows: subsets[bi].len(),
                rmse: vec![f64::NAN; config.n_seeds],
                mean: 0.0,
                std: 0.0,
                median: 0.0,
            });
            for s in 0..config.n_seeds {
                // Same seed stream for a given kind across budgets.
                let stream = (ki as u64) << 32 | s as u64;
                trials.push((Trial { cell: idx, seed: derive_seed(seed, stream) }, bi, s));
            }
        }
    }

    let run = |trial: &Trial, bi: usize| -> Result<f64> {
        let cell = &cells[trial.cell];
        let mut model = Model::new(cell.kind, config.mode, trial.seed);
        let cfg = TrainConfig { seed: trial.seed, ..train_config.clone() };
        train(&mut model, &subsets[bi], &cfg)?;
        Ok(evaluate(&model, validation).rmse)
    };

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials.len());
    let results: Vec<Result<f64>> = if threads <= 1 {
        trials.iter().map(|(t, bi, _)| run(t, *bi)).collect()
    } else {
        let mut out: Vec<Option<Result<f64>>> = (0..trials.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let trials = &trials;
                    let run = &run;
                    scope.spawn(move || {
                        (w..trials.len())
                            .step_by(threads)
                            .map(|i| (i, run(&trials[i].0, trials[i].1)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("sweep worker panicked") {
                    out[i] = Some(r);
                }
            }
        });
        out.into_iter().map(|r| r.expect("every trial ran")).collect()
    };

    for ((trial, _, s), r) in trials.iter().zip(results) {
        cells[trial.cell].rmse[*s] = r?;
    }
    for c in &mut cells {
        let (mean, std, median) = summarize(&c.rmse);
        c.mean = mean;
        c.std = std;
        c.median = median;
    }
    Ok(SweepTable { validation_rows: validation.len(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{InteractionState, Vec3};
    use crate::learning::DatasetRow;

    fn toy(n_per_stage: usize) -> Dataset {
        let mut rows = Vec::new();
        for stage in 0..3u8 {
            for k in 0..n_per_stage {
                let s = k as f64 * 0.37 + f64::from(stage);
                let dp = Vec3::new(s.sin(), s.cos(), -0.5 - 0.1 * f64::from(stage));
                rows.push(DatasetRow {
                    t: k as f64 * 0.1,
                    x: InteractionState::new(dp, Vec3::zeros(), Vec3::new(0.3, 0.0, 0.0)),
                    f_label: Vec3::new(0.0, 0.0, dp.x),
                    stage,
                });
            }
        }
        Dataset::new(rows).unwrap()
    }

    #[test]
    fn summary_statistics() {
        let (m, s, med) = summarize(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(m, 4.0);
        assert_eq!(med, 2.5);
        assert!((s - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_shaped() {
        let data = toy(60);
        let cfg = SweepConfig {
            budgets_min: vec![0.1, 0.3],
            kinds: vec![ModelKind::Equivariant, ModelKind::ShallowNonequiv],
            n_seeds: 2,
            mode: FeatureMode::NearHover,
        };
        let tc = TrainConfig { epochs: 5, batch_size: 16, ..Default::default() };
        let a = sample_efficiency_sweep(&data, &data, 6.0, &cfg, &tc, 9).unwrap();
        let b = sample_efficiency_sweep(&data, &data, 6.0, &cfg, &tc, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 4);
        assert_eq!(a.cell(0.1, ModelKind::Equivariant).unwrap().train_rows, 60);
        assert_eq!(a.cell(0.3, ModelKind::ShallowNonequiv).unwrap().train_rows, 180);
    }

    #[test]
    fn budget_beyond_data_is_rejected() {
        let data = toy(10);
        let cfg = SweepConfig { budgets_min: vec![1.0], ..Default::default() };
        let err = sample_efficiency_sweep(&data, &data, 1.0, &cfg, &TrainConfig::default(), 0);
        assert!(err.is_err());
    }
}
