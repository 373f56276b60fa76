//! Multi-object tracking with a Rao-Blackwellized particle filter over
//! data associations, fusing Kalman position likelihoods with re-ID
//! appearance similarity.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! unsuffixed aliases at the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appearance;
pub mod association;
pub mod config;
pub mod error;
mod hungarian;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod motion;
pub mod resample;
pub mod scalar;
pub mod synth;
pub mod tracker;
pub mod types;

pub use appearance::UpdateMode;
pub use association::AssociationMode;
pub use error::{Error, Result};
pub use metrics::{evaluate, evaluate_detailed, EvalReport, Evaluation, Match};
pub use scalar::Scalar;
pub use synth::{ScenarioKind, ScenarioSpec};
pub use tracker::{run_sequence, step};
pub use types::{Target, TrackStatus};

pub type BBox = types::BBox<f64>;
pub type FeatureVec = types::FeatureVec<f64>;
pub type Detection = types::Detection<f64>;
pub type TrackState = types::TrackState<f64>;
pub type Particle = types::Particle<f64>;
pub type AssociationMatrix = types::AssociationMatrix<f64>;
pub type GtRecord = io::GtRecord<f64>;
pub type SequenceData = io::SequenceData<f64>;
pub type FrameOutput = tracker::FrameOutput<f64>;
pub type MotionParams = motion::MotionParams<f64>;
pub type AppearanceParams = appearance::AppearanceParams<f64>;
pub type AssociationParams = association::AssociationParams<f64>;
pub type TrackerParams = config::TrackerParams<f64>;
pub type RunConfig = config::RunConfig<f64>;
pub type Scenario = synth::Scenario<f64>;

pub type BBoxF32 = types::BBox<f32>;
pub type DetectionF32 = types::Detection<f32>;
pub type ParticleF32 = types::Particle<f32>;
pub type RunConfigF32 = config::RunConfig<f32>;
pub type SequenceDataF32 = io::SequenceData<f32>;
pub type FrameOutputF32 = tracker::FrameOutput<f32>;
