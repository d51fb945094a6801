//! Unsupervised driver behavior profiling from smartphone IMU streams.
//!
//! Raw multi-rate sensor logs are resampled to a 50 Hz frame grid, MinMax
//! scaled with extrema fitted on normal driving only, and cut into
//! (sequence, next frame) pairs. A stacked LSTM trained on normal pairs
//! regresses the next frame; at inference the regression residual is the
//! anomaly score, and ROC-AUC over residuals measures how well each
//! aggressive maneuver separates from normal driving.
//!
//! The numeric core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix the common choices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod digest;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use ingest::{Axis, Behavior, Channel, EventLabel, SensorKind, SensorTrace, Session};
pub use model::{Gradients, LstmModel, ModelShape};
pub use optim::{AdamState, OptimConfig};
pub use pipeline::{Detector, ScoreRecord, TrainConfig};
pub use preprocess::{FrameSeries, ScalerParams, WindowPair};
pub use scalar::Scalar;

/// Double-precision model, used for training and gradient checks.
pub type LstmModel64 = model::LstmModel<f64>;
/// Single-precision model for inference.
pub type LstmModel32 = model::LstmModel<f32>;
pub type Detector64 = pipeline::Detector<f64>;
pub type Detector32 = pipeline::Detector<f32>;
pub type WindowPair64 = preprocess::WindowPair<f64>;
pub type FrameSeries64 = preprocess::FrameSeries<f64>;
pub type ScalerParams64 = preprocess::ScalerParams<f64>;
pub type ScoreRecord64 = pipeline::ScoreRecord<f64>;
