//! MOSUM-based multiple change-point detection with bootstrap confidence
//! intervals for the change-point locations.
//!
//! The crate is organised bottom-up:
//!
//! * [`mosum`]: moving-sum statistics, local scale and critical values;
//! * [`detector`]: single- and multiscale detection, the oracle locator and
//!   per-change-point plug-in quantities;
//! * [`bootstrap`]: segment-wise resampling and pointwise / uniform intervals;
//! * [`limits`]: Monte-Carlo samplers of the limit laws of the estimators;
//! * [`sim`]: coverage studies on canonical test signals.

pub mod bootstrap;
pub mod detector;
pub mod error;
pub mod limits;
pub mod mosum;
pub mod noise;
pub mod rng;
pub mod series;
pub mod sim;

pub use bootstrap::{BootstrapConfig, BootstrapDeviations, Interval, IntervalKind, IntervalSet};
pub use detector::{ChangePointModel, DetectionResult, DetectorConfig};
pub use error::{Error, Result};
pub use mosum::{MosumProfile, ScaleEstimator};
pub use noise::ErrorModel;
pub use series::{Bandwidth, TimeSeries};
