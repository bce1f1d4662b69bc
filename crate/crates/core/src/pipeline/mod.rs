//! Simulation, data collection, training stages and evaluation.

pub mod collect;
pub mod episode;
pub mod experiment;
pub mod export;
pub mod log;
pub mod metrics;
pub mod sweep;
pub mod trajectory;

pub use episode::{run_episode, Compensation, Episode};
pub use collect::{collect_stage, derive_seed, held_out_dataset, sequential_train, CollectContext, StagePlan, StagedRun};
pub use experiment::{Comparison, Deployment};
pub use export::{export_field_grid, FieldGrid, GridSpec, Plane};
pub use log::{FlightLog, FlightRow};
pub use metrics::{tracking_metrics, TrackingMetrics};
pub use sweep::{sample_efficiency_sweep, SweepConfig, SweepTable};
pub use trajectory::{Hover, Lemniscate, Trajectory, TrajectorySpec, Transect};
