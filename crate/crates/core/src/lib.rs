//! Equivariant downwash modeling for a leader/follower multirotor pair.
//!
//! The crate simulates a feedback-linearized follower flying under a
//! hovering leader, learns the downwash force it feels with an
//! SO(2)-equivariant shallow network (plus two non-equivariant baselines),
//! and deploys the learned model as a feedforward compensation term in an
//! LQR tracking loop.

pub mod control;
pub mod dynamics;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod learning;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use geometry::{FeatureMode, FrameRotation, InteractionState, PlanarRotation, Vec3};
