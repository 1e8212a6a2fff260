//! Elliptical region-of-interest visual servoing for a pan/tilt camera.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arena;
pub mod config;
pub mod controller;
pub mod geometry;
pub mod metrics;
pub mod protocol;
pub mod scalar;
pub mod sim;
pub mod telemetry;
pub mod trial;

pub use controller::{step, step_series, ControllerConfig, GimbalCommand};
pub use geometry::{EllipseRoi, FrameSpec, ImagePoint, PolarPoint, Sector};
pub use scalar::Scalar;

pub type ImagePoint64 = ImagePoint<f64>;
pub type PolarPoint64 = PolarPoint<f64>;
pub type EllipseRoi64 = EllipseRoi<f64>;
pub type ControllerConfig64 = ControllerConfig<f64>;
pub type GimbalCommand64 = GimbalCommand<f64>;
pub type TrialConfig64 = trial::TrialConfig<f64>;
pub type TrialRecord64 = trial::TrialRecord<f64>;
pub type SensitivityReport64 = metrics::SensitivityReport<f64>;
