//! Elliptical region-of-interest geometry in centered, y-up image coordinates.
//!
//! The ROI is an axis-aligned ellipse centered on the image. A tracked point
//! is located relative to it by `P = x²/a² + y²/b²`: `P ≤ 1` is inside (the
//! boundary counts as inside), `P > 1` is outside. Outside points are binned
//! into four angular sectors split by the diagonals at ±π/4 and ±3π/4.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Smallest and largest ROI half-axis as a fraction of the frame dimension.
pub const ROI_FRACTION_MIN: f64 = 0.05;
pub const ROI_FRACTION_MAX: f64 = 0.49;
/// Default ROI half-axis fraction along both image axes.
pub const ROI_FRACTION_DEFAULT: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("frame dimensions must be positive, got {width}x{height}")]
    InvalidFrame { width: u32, height: u32 },
    #[error("ROI half-axes must satisfy 0 < a <= width/2 and 0 < b <= height/2, got a={a}, b={b} for a {width}x{height} frame")]
    InvalidRoi {
        a: f64,
        b: f64,
        width: u32,
        height: u32,
    },
    #[error("ROI fraction {0} outside [{min}, {max}]", min = ROI_FRACTION_MIN, max = ROI_FRACTION_MAX)]
    FractionOutOfRange(f64),
}

/// Image frame size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub width: u32,
    pub height: u32,
}

impl FrameSpec {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidFrame { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn half_width<T: Scalar>(&self) -> T {
        T::lit(self.width as f64 / 2.0)
    }

    pub fn half_height<T: Scalar>(&self) -> T {
        T::lit(self.height as f64 / 2.0)
    }

    /// Whether a centered point lies on or inside the frame edges.
    pub fn contains<T: Scalar>(&self, p: ImagePoint<T>) -> bool {
        p.x.abs() <= self.half_width() && p.y.abs() <= self.half_height()
    }
}

impl Default for FrameSpec {
    /// 1920x720, the frame size streamed by the reference camera.
    fn default() -> Self {
        Self {
            width: 1920,
            height: 720,
        }
    }
}

/// Tracked-object position in pixels, measured from the frame center with
/// `y` increasing upward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> ImagePoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Converts raw tracker coordinates (origin top-left, row increasing
    /// downward) into the centered y-up convention.
    pub fn from_raw(row: T, col: T, frame: FrameSpec) -> Self {
        Self {
            x: col - frame.half_width(),
            y: frame.half_height::<T>() - row,
        }
    }

    pub fn to_polar(self) -> PolarPoint<T> {
        let r = self.x.hypot(self.y);
        let mut theta = self.y.atan2(self.x);
        // atan2 yields -π for (x < 0, y = -0.0); the half-open range excludes it.
        if theta <= -T::PI() {
            theta = T::PI();
        }
        if r == T::zero() {
            theta = T::zero();
        }
        PolarPoint { r, theta }
    }
}

/// Alias of [`ImagePoint::from_raw`] named after the ingestion step.
pub fn to_centered<T: Scalar>(row: T, col: T, frame: FrameSpec) -> ImagePoint<T> {
    ImagePoint::from_raw(row, col, frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint<T> {
    pub r: T,
    /// Polar angle in (-π, π].
    pub theta: T,
}

impl<T: Scalar> PolarPoint<T> {
    pub fn to_cartesian(self) -> ImagePoint<T> {
        ImagePoint::new(self.r * self.theta.cos(), self.r * self.theta.sin())
    }
}

/// Axis-aligned elliptical ROI centered on the frame. `a` is the horizontal
/// half-axis and `b` the vertical one, both in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseRoi<T> {
    a: T,
    b: T,
    frame: FrameSpec,
}

impl<T: Scalar> EllipseRoi<T> {
    pub fn new(a: T, b: T, frame: FrameSpec) -> Result<Self, GeometryError> {
        let ok =
            a > T::zero() && b > T::zero() && a <= frame.half_width() && b <= frame.half_height();
        if !ok {
            return Err(GeometryError::InvalidRoi {
                a: a.as_f64(),
                b: b.as_f64(),
                width: frame.width,
                height: frame.height,
            });
        }
        Ok(Self { a, b, frame })
    }

    /// Half-axes as fractions of the full frame width and height.
    pub fn from_fractions(
        frame: FrameSpec,
        frac_x: f64,
        frac_y: f64,
    ) -> Result<Self, GeometryError> {
        for f in [frac_x, frac_y] {
            if !(ROI_FRACTION_MIN..=ROI_FRACTION_MAX).contains(&f) {
                return Err(GeometryError::FractionOutOfRange(f));
            }
        }
        Self::new(
            T::lit(frac_x * frame.width as f64),
            T::lit(frac_y * frame.height as f64),
            frame,
        )
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn frame(&self) -> FrameSpec {
        self.frame
    }

    /// `x²/a² + y²/b²`.
    #[inline]
    pub fn relative_position(&self, p: ImagePoint<T>) -> T {
        let u = p.x / self.a;
        let v = p.y / self.b;
        u * u + v * v
    }

    #[inline]
    pub fn is_inside(&self, p: ImagePoint<T>) -> bool {
        self.relative_position(p) <= T::one()
    }
}

impl<T: Scalar> Default for EllipseRoi<T> {
    fn default() -> Self {
        Self::from_fractions(
            FrameSpec::default(),
            ROI_FRACTION_DEFAULT,
            ROI_FRACTION_DEFAULT,
        )
        .expect("default ROI is valid")
    }
}

pub fn relative_position<T: Scalar>(p: ImagePoint<T>, roi: &EllipseRoi<T>) -> T {
    roi.relative_position(p)
}

pub fn is_inside<T: Scalar>(p: ImagePoint<T>, roi: &EllipseRoi<T>) -> bool {
    roi.is_inside(p)
}

/// Angular zone of the ROI, split by the diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    Right,
    Top,
    Left,
    Bottom,
}

impl Sector {
    pub const ALL: [Sector; 4] = [Sector::Right, Sector::Top, Sector::Left, Sector::Bottom];

    /// Classifies a polar angle in (-π, π]. Each diagonal belongs to the
    /// sector counterclockwise of it, so π/4 is `Top` and -π/4 is `Right`.
    pub fn classify<T: Scalar>(theta: T) -> Sector {
        let q = T::FRAC_PI_4();
        let q3 = T::lit(3.0) * q;
        if theta >= -q && theta < q {
            Sector::Right
        } else if theta >= q && theta < q3 {
            Sector::Top
        } else if theta >= -q3 && theta < -q {
            Sector::Bottom
        } else {
            Sector::Left
        }
    }

    /// The sector a quarter turn counterclockwise from this one.
    pub fn rotate_ccw(self) -> Sector {
        match self {
            Sector::Right => Sector::Top,
            Sector::Top => Sector::Left,
            Sector::Left => Sector::Bottom,
            Sector::Bottom => Sector::Right,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Right => "right",
            Sector::Top => "top",
            Sector::Left => "left",
            Sector::Bottom => "bottom",
        }
    }

    pub fn parse(s: &str) -> Option<Sector> {
        match s {
            "right" => Some(Sector::Right),
            "top" => Some(Sector::Top),
            "left" => Some(Sector::Left),
            "bottom" => Some(Sector::Bottom),
            _ => None,
        }
    }
}

pub fn classify_sector<T: Scalar>(theta: T) -> Sector {
    Sector::classify(theta)
}
