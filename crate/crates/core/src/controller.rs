//! Memoryless bang-bang motor schema.
//!
//! While the tracked point is inside the ROI the gimbal is left alone. Once
//! it leaves, exactly one axis is driven at the full rate: yaw for the left
//! and right sectors, pitch for the top and bottom sectors. A positive yaw
//! rate pans the camera toward image-right and a positive pitch rate tilts it
//! toward image-up, so each command moves the point back toward the center.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{EllipseRoi, FrameSpec, ImagePoint, Sector};
use crate::scalar::Scalar;

/// Maximum gimbal actuator rate, rad/s.
pub const HARDWARE_RATE_CAP: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("rate magnitude must be in (0, {HARDWARE_RATE_CAP}] rad/s, got {0}")]
    InvalidRate(f64),
    #[error("ROI belongs to a {roi_w}x{roi_h} frame but the controller frame is {w}x{h}")]
    FrameMismatch {
        roi_w: u32,
        roi_h: u32,
        w: u32,
        h: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig<T> {
    rate_magnitude: T,
    roi: EllipseRoi<T>,
    frame: FrameSpec,
}

impl<T: Scalar> ControllerConfig<T> {
    pub fn new(rate_magnitude: T, roi: EllipseRoi<T>) -> Result<Self, ControllerError> {
        let cap = T::lit(HARDWARE_RATE_CAP);
        if !(rate_magnitude > T::zero() && rate_magnitude <= cap) {
            return Err(ControllerError::InvalidRate(rate_magnitude.as_f64()));
        }
        Ok(Self {
            rate_magnitude,
            roi,
            frame: roi.frame(),
        })
    }

    pub fn with_frame(
        rate_magnitude: T,
        roi: EllipseRoi<T>,
        frame: FrameSpec,
    ) -> Result<Self, ControllerError> {
        if roi.frame() != frame {
            return Err(ControllerError::FrameMismatch {
                roi_w: roi.frame().width,
                roi_h: roi.frame().height,
                w: frame.width,
                h: frame.height,
            });
        }
        Self::new(rate_magnitude, roi)
    }

    pub fn rate_magnitude(&self) -> T {
        self.rate_magnitude
    }

    pub fn roi(&self) -> &EllipseRoi<T> {
        &self.roi
    }

    pub fn frame(&self) -> FrameSpec {
        self.frame
    }
}

impl<T: Scalar> Default for ControllerConfig<T> {
    fn default() -> Self {
        Self::new(T::lit(HARDWARE_RATE_CAP), EllipseRoi::default())
            .expect("default config is valid")
    }
}

/// Gimbal rate command in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GimbalCommand<T> {
    pub yaw_rate: T,
    pub pitch_rate: T,
}

impl<T: Scalar> GimbalCommand<T> {
    pub fn new(yaw_rate: T, pitch_rate: T) -> Self {
        Self {
            yaw_rate,
            pitch_rate,
        }
    }

    pub fn idle() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn yaw(rate: T) -> Self {
        Self::new(rate, T::zero())
    }

    pub fn pitch(rate: T) -> Self {
        Self::new(T::zero(), rate)
    }

    pub fn is_idle(&self) -> bool {
        self.yaw_rate == T::zero() && self.pitch_rate == T::zero()
    }

    /// At most one axis is driven.
    pub fn is_single_axis(&self) -> bool {
        self.yaw_rate == T::zero() || self.pitch_rate == T::zero()
    }
}

/// Maps a tracked point to a gimbal command.
pub fn step<T: Scalar>(p: ImagePoint<T>, cfg: &ControllerConfig<T>) -> GimbalCommand<T> {
    if cfg.roi.is_inside(p) {
        return GimbalCommand::idle();
    }
    let m = cfg.rate_magnitude;
    match Sector::classify(p.to_polar().theta) {
        Sector::Right => GimbalCommand::yaw(m),
        Sector::Left => GimbalCommand::yaw(-m),
        Sector::Top => GimbalCommand::pitch(m),
        Sector::Bottom => GimbalCommand::pitch(-m),
    }
}

pub fn step_series<T: Scalar>(
    points: &[ImagePoint<T>],
    cfg: &ControllerConfig<T>,
) -> Vec<GimbalCommand<T>> {
    points.iter().map(|&p| step(p, cfg)).collect()
}
