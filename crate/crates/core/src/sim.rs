//! Fixed-timestep world model: a unicycle USV on the ground plane, a UAV
//! hovering at a fixed pose, and a rate-limited pan/tilt gimbal whose camera
//! projects the USV into the image.
//!
//! World frame: `x` east, `y` north, `z` up, water surface at `z = 0`.
//! Pan is a compass-style heading (0 looks north, positive turns clockwise,
//! i.e. toward image-right). Tilt is elevation: 0 is the horizon and -π/2
//! looks straight down. The camera frame has `X` to image-right, `Y` to
//! image-up and `Z` along the optical axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{self, ControllerConfig, GimbalCommand, HARDWARE_RATE_CAP};
use crate::geometry::{FrameSpec, ImagePoint};
use crate::scalar::Scalar;

/// Fixed hover altitude: six feet.
pub const DEFAULT_ALTITUDE_M: f64 = 1.8288;
/// One video frame at 30 fps.
pub const DEFAULT_DT_S: f64 = 1.0 / 30.0;
pub const DEFAULT_HFOV_DEG: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizontal field of view must be in (0, π), got {0} rad")]
    InvalidFov(f64),
    #[error("UAV altitude must be positive, got {0} m")]
    InvalidAltitude(f64),
    #[error("gimbal max rate must be positive, got {0} rad/s")]
    InvalidMaxRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsvState<T> {
    pub x: T,
    pub y: T,
    /// Counterclockwise from +x, radians.
    pub heading: T,
    /// Forward speed, never negative.
    pub speed: T,
}

impl<T: Scalar> UsvState<T> {
    pub fn new(x: T, y: T, heading: T, speed: T) -> Self {
        Self {
            x,
            y,
            heading,
            speed: speed.max(T::zero()),
        }
    }

    pub fn position(&self) -> [T; 3] {
        [self.x, self.y, T::zero()]
    }
}

/// Unicycle update with semi-implicit Euler: the heading is advanced first
/// and the new heading drives the position update.
pub fn usv_step<T: Scalar>(s: UsvState<T>, rudder_rate: T, dt: T) -> UsvState<T> {
    let heading = s.heading + rudder_rate * dt;
    UsvState {
        x: s.x + s.speed * heading.cos() * dt,
        y: s.y + s.speed * heading.sin() * dt,
        heading,
        speed: s.speed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavPose<T> {
    pub x: T,
    pub y: T,
    pub altitude: T,
}

impl<T: Scalar> UavPose<T> {
    pub fn new(x: T, y: T, altitude: T) -> Result<Self, SimError> {
        if !(altitude > T::zero()) {
            return Err(SimError::InvalidAltitude(altitude.as_f64()));
        }
        Ok(Self { x, y, altitude })
    }
}

impl<T: Scalar> Default for UavPose<T> {
    fn default() -> Self {
        Self {
            x: T::zero(),
            y: T::zero(),
            altitude: T::lit(DEFAULT_ALTITUDE_M),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GimbalState<T> {
    /// Accumulated (unwrapped) pan angle.
    pan: T,
    tilt: T,
    max_rate: T,
}

impl<T: Scalar> GimbalState<T> {
    pub fn new(pan: T, tilt: T, max_rate: T) -> Result<Self, SimError> {
        if !(max_rate > T::zero()) {
            return Err(SimError::InvalidMaxRate(max_rate.as_f64()));
        }
        Ok(Self {
            pan,
            tilt: clamp_tilt(tilt),
            max_rate,
        })
    }

    /// Pan normalized to (-π, π].
    pub fn pan(&self) -> T {
        wrap_angle(self.pan)
    }

    pub fn pan_unwrapped(&self) -> T {
        self.pan
    }

    pub fn tilt(&self) -> T {
        self.tilt
    }

    pub fn max_rate(&self) -> T {
        self.max_rate
    }

    pub fn tilt_limits() -> (T, T) {
        (-T::FRAC_PI_2(), T::zero())
    }
}

fn clamp_tilt<T: Scalar>(tilt: T) -> T {
    let (lo, hi) = GimbalState::<T>::tilt_limits();
    tilt.max(lo).min(hi)
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = a - two_pi * ((a + T::PI()) / two_pi).floor();
    if w <= -T::PI() {
        w = w + two_pi;
    }
    w
}

/// Result of advancing the gimbal by one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GimbalUpdate<T> {
    pub state: GimbalState<T>,
    /// The command asked for more than `max_rate` on some axis and was clamped.
    pub saturated: bool,
}

pub fn gimbal_step<T: Scalar>(g: GimbalState<T>, cmd: GimbalCommand<T>, dt: T) -> GimbalUpdate<T> {
    let limit = |r: T| r.max(-g.max_rate).min(g.max_rate);
    let yaw = limit(cmd.yaw_rate);
    let pitch = limit(cmd.pitch_rate);
    let saturated = yaw != cmd.yaw_rate || pitch != cmd.pitch_rate;
    GimbalUpdate {
        state: GimbalState {
            pan: g.pan + yaw * dt,
            tilt: clamp_tilt(g.tilt + pitch * dt),
            max_rate: g.max_rate,
        },
        saturated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel<T> {
    frame: FrameSpec,
    horizontal_fov: T,
}

impl<T: Scalar> CameraModel<T> {
    pub fn new(frame: FrameSpec, horizontal_fov: T) -> Result<Self, SimError> {
        if !(horizontal_fov > T::zero() && horizontal_fov < T::PI()) {
            return Err(SimError::InvalidFov(horizontal_fov.as_f64()));
        }
        Ok(Self {
            frame,
            horizontal_fov,
        })
    }

    pub fn frame(&self) -> FrameSpec {
        self.frame
    }

    pub fn horizontal_fov(&self) -> T {
        self.horizontal_fov
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> T {
        self.frame.half_width::<T>() / (self.horizontal_fov / T::lit(2.0)).tan()
    }

    pub fn vertical_fov(&self) -> T {
        T::lit(2.0) * (self.frame.half_height::<T>() / self.focal_px()).atan()
    }
}

impl<T: Scalar> Default for CameraModel<T> {
    fn default() -> Self {
        Self::new(FrameSpec::default(), T::lit(DEFAULT_HFOV_DEG.to_radians()))
            .expect("default camera is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub point: ImagePoint<T>,
    pub visible: bool,
}

/// Rotation of the camera axes expressed in world coordinates: right, up and
/// forward unit vectors.
pub fn camera_axes<T: Scalar>(g: &GimbalState<T>) -> [[T; 3]; 3] {
    let (sp, cp) = g.pan.sin_cos();
    let (st, ct) = g.tilt.sin_cos();
    let right = [cp, -sp, T::zero()];
    let up = [-st * sp, -st * cp, ct];
    let forward = [ct * sp, ct * cp, st];
    [right, up, forward]
}

pub fn project<T: Scalar>(
    world_point: [T; 3],
    uav: &UavPose<T>,
    g: &GimbalState<T>,
    cam: &CameraModel<T>,
) -> Projection<T> {
    let d = [
        world_point[0] - uav.x,
        world_point[1] - uav.y,
        world_point[2] - uav.altitude,
    ];
    let dot = |a: [T; 3]| a[0] * d[0] + a[1] * d[1] + a[2] * d[2];
    let [right, up, forward] = camera_axes(g);
    let (xc, yc, zc) = (dot(right), dot(up), dot(forward));
    if zc == T::zero() {
        return Projection {
            point: ImagePoint::origin(),
            visible: false,
        };
    }
    let f = cam.focal_px();
    let point = ImagePoint::new(f * xc / zc, f * yc / zc);
    let visible = zc > T::zero() && cam.frame.contains(point);
    Projection { point, visible }
}

/// Intersects the viewing ray through a centered image point with the
/// ground plane. `None` if the ray does not descend.
pub fn back_project<T: Scalar>(
    p: ImagePoint<T>,
    uav: &UavPose<T>,
    g: &GimbalState<T>,
    cam: &CameraModel<T>,
) -> Option<[T; 3]> {
    let f = cam.focal_px();
    let [right, up, forward] = camera_axes(g);
    let ray: Vec<T> = (0..3)
        .map(|i| right[i] * p.x + up[i] * p.y + forward[i] * f)
        .collect();
    if !(ray[2] < T::zero()) {
        return None;
    }
    let s = uav.altitude / -ray[2];
    Some([uav.x + s * ray[0], uav.y + s * ray[1], T::zero()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState<T> {
    pub usv: UsvState<T>,
    pub uav: UavPose<T>,
    pub gimbal: GimbalState<T>,
    pub time: T,
}

impl<T: Scalar> WorldState<T> {
    /// Gimbal aimed at the USV's current position.
    pub fn aimed_at_usv(usv: UsvState<T>, uav: UavPose<T>, max_rate: T) -> Result<Self, SimError> {
        let (dx, dy) = (usv.x - uav.x, usv.y - uav.y);
        let pan = dx.atan2(dy);
        let tilt = -(uav.altitude.atan2(dx.hypot(dy)));
        Ok(Self {
            usv,
            uav,
            gimbal: GimbalState::new(pan, tilt, max_rate)?,
            time: T::zero(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    pub world: WorldState<T>,
    pub command: GimbalCommand<T>,
    pub point: ImagePoint<T>,
    pub visible: bool,
}

/// One control cycle: move the USV, observe it, run the schema and move the
/// gimbal. An invisible target produces an idle command.
pub fn closed_loop_step<T: Scalar>(
    w: &WorldState<T>,
    rudder_rate: T,
    cfg: &ControllerConfig<T>,
    cam: &CameraModel<T>,
    dt: T,
) -> StepOutcome<T> {
    let usv = usv_step(w.usv, rudder_rate, dt);
    let Projection { point, visible } = project(usv.position(), &w.uav, &w.gimbal, cam);
    let command = if visible {
        controller::step(point, cfg)
    } else {
        GimbalCommand::idle()
    };
    let gimbal = gimbal_step(w.gimbal, command, dt).state;
    StepOutcome {
        world: WorldState {
            usv,
            uav: w.uav,
            gimbal,
            time: w.time + dt,
        },
        command,
        point,
        visible,
    }
}

/// Gimbal max rate matching the hardware actuator.
pub fn default_max_rate<T: Scalar>() -> T {
    T::lit(HARDWARE_RATE_CAP)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn down() -> GimbalState<f64> {
        GimbalState::new(0.0, -FRAC_PI_2, 0.3).unwrap()
    }

    #[test]
    fn usv_straight_line() {
        let s = usv_step(UsvState::new(0.0, 0.0, 0.0, 1.0), 0.0, 1.0);
        assert_eq!((s.x, s.y, s.heading), (1.0, 0.0, 0.0));
    }

    #[test]
    fn usv_turns_in_place_when_stopped() {
        let s = usv_step(UsvState::new(2.0, -1.0, 0.5, 0.0), 0.7, 1.0);
        assert_eq!((s.x, s.y), (2.0, -1.0));
        assert_abs_diff_eq!(s.heading, 1.2, epsilon = 1e-15);
    }

    #[test]
    fn usv_matches_hand_integration() {
        // Hand-written semi-implicit Euler: heading first, then position.
        let (mut x, mut y, mut h) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..4 {
            h += FRAC_PI_2 * 0.5;
            x += h.cos() * 0.5;
            y += h.sin() * 0.5;
        }
        let mut s = UsvState::new(0.0, 0.0, 0.0, 1.0);
        for _ in 0..4 {
            s = usv_step(s, FRAC_PI_2, 0.5);
        }
        assert_abs_diff_eq!(s.x, x, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, y, epsilon = 1e-12);
        assert_abs_diff_eq!(s.heading, h, epsilon = 1e-12);
        assert_abs_diff_eq!(s.heading, PI, epsilon = 1e-12);
    }

    #[test]
    fn speed_is_never_negative() {
        assert_eq!(UsvState::new(0.0, 0.0, 0.0, -1.0).speed, 0.0);
    }

    #[test]
    fn gimbal_idle_and_yaw() {
        let g = GimbalState::new(0.1, -0.4, 0.3).unwrap();
        let u = gimbal_step(g, GimbalCommand::idle(), 0.1);
        assert_eq!(u.state, g);
        assert!(!u.saturated);
        let u = gimbal_step(g, GimbalCommand::yaw(0.3), 0.1);
        assert_abs_diff_eq!(u.state.pan() - g.pan(), 0.03, epsilon = 1e-15);
        assert_eq!(u.state.tilt(), g.tilt());
    }

    #[test]
    fn gimbal_tilt_saturates() {
        let g = down();
        let u = gimbal_step(g, GimbalCommand::pitch(-0.3), 0.1);
        assert_eq!(u.state.tilt(), -FRAC_PI_2);
        let g = GimbalState::new(0.0, 0.0, 0.3).unwrap();
        let u = gimbal_step(g, GimbalCommand::pitch(0.3), 0.1);
        assert_eq!(u.state.tilt(), 0.0);
    }

    #[test]
    fn gimbal_clamps_excess_rate() {
        let g = GimbalState::new(0.0, -0.5, 0.3).unwrap();
        let u = gimbal_step(g, GimbalCommand::yaw(1.0), 0.1);
        assert!(u.saturated);
        assert_abs_diff_eq!(u.state.pan(), 0.03, epsilon = 1e-15);
    }

    #[test]
    fn pan_wraps_on_read() {
        let g = GimbalState::new(PI - 0.01, -0.5, 0.3).unwrap();
        let u = gimbal_step(g, GimbalCommand::yaw(0.3), 0.1);
        assert_abs_diff_eq!(u.state.pan(), -PI + 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(u.state.pan_unwrapped(), PI + 0.02, epsilon = 1e-12);
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
    }

    #[test]
    fn optical_axis_maps_to_center() {
        let cam = CameraModel::default();
        let uav = UavPose::default();
        let g = GimbalState::new(0.3, -0.6, 0.3).unwrap();
        let [_, _, fwd] = camera_axes(&g);
        let pt = [fwd[0] * 3.0, fwd[1] * 3.0, uav.altitude + fwd[2] * 3.0];
        let p = project(pt, &uav, &g, &cam);
        assert!(p.visible);
        assert_abs_diff_eq!(p.point.x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.point.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn behind_camera_is_invisible() {
        let cam = CameraModel::default();
        let uav = UavPose::<f64>::default();
        let g = GimbalState::new(0.0, 0.0, 0.3).unwrap();
        // Camera looks north; the point is due south at eye level.
        let p = project([0.0, -5.0, uav.altitude], &uav, &g, &cam);
        assert!(!p.visible);
        let p = project([1.0, 0.0, uav.altitude], &uav, &g, &cam);
        assert!(!p.visible);
        assert!(p.point.x.is_finite() && p.point.y.is_finite());
    }

    #[test]
    fn straight_down_projection() {
        let cam = CameraModel::default();
        let uav = UavPose::new(0.0, 0.0, 1.83).unwrap();
        let p = project([0.5, 0.0, 0.0], &uav, &down(), &cam);
        assert!(p.visible);
        // f = 960 / tan(45°) = 960; u = 960 * 0.5 / 1.83
        assert_abs_diff_eq!(cam.focal_px(), 960.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.point.x, 262.295_081_967_213_1, epsilon = 1e-6);
        assert_abs_diff_eq!(p.point.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn back_projection_inverts_projection() {
        let cam = CameraModel::default();
        let uav = UavPose::new(1.0, -2.0, 1.8288).unwrap();
        let g = GimbalState::new(0.4, -0.5, 0.3).unwrap();
        let target = ImagePoint::new(-300.0, 120.0);
        let w = back_project(target, &uav, &g, &cam).unwrap();
        let p = project(w, &uav, &g, &cam);
        assert_abs_diff_eq!(p.point.x, target.x, epsilon = 1e-9);
        assert_abs_diff_eq!(p.point.y, target.y, epsilon = 1e-9);
    }

    #[test]
    fn vertical_fov_from_aspect() {
        let cam = CameraModel::<f64>::default();
        assert_abs_diff_eq!(
            cam.vertical_fov(),
            2.0 * (360.0f64 / 960.0).atan(),
            epsilon = 1e-12
        );
        assert!(CameraModel::new(FrameSpec::default(), PI).is_err());
        assert!(CameraModel::new(FrameSpec::default(), 0.0).is_err());
    }

    #[test]
    fn stationary_centered_usv_never_moves_gimbal() {
        let cfg = ControllerConfig::default();
        let cam = CameraModel::default();
        let usv = UsvState::new(0.5, 4.0, 0.0, 0.0);
        let mut w = WorldState::aimed_at_usv(usv, UavPose::default(), 0.3).unwrap();
        let g0 = w.gimbal;
        for _ in 0..1000 {
            let o = closed_loop_step(&w, 0.0, &cfg, &cam, DEFAULT_DT_S);
            assert!(o.command.is_idle());
            w = o.world;
        }
        assert_eq!(w.gimbal, g0);
    }

    #[test]
    fn right_exit_engages_yaw_immediately() {
        let cfg = ControllerConfig::default();
        let cam = CameraModel::default();
        let dt = DEFAULT_DT_S;
        // Driving east across a camera looking north.
        let usv = UsvState::new(0.0, 4.0, 0.0, 1.0);
        let mut w = WorldState::aimed_at_usv(usv, UavPose::default(), 0.3).unwrap();
        let mut engaged = false;
        for _ in 0..300 {
            // Manual composition of the same steps.
            let moved = usv_step(w.usv, 0.0, dt);
            let pr = project(moved.position(), &w.uav, &w.gimbal, &cam);
            let expect = controller::step(pr.point, &cfg);
            let o = closed_loop_step(&w, 0.0, &cfg, &cam, dt);
            assert_eq!(o.command, expect);
            if cfg.roi().relative_position(o.point) > 1.0 {
                assert_eq!(o.command, GimbalCommand::yaw(0.3));
                engaged = true;
                break;
            }
            assert!(o.command.is_idle());
            w = o.world;
        }
        assert!(engaged);
    }

    proptest! {
        #[test]
        fn projection_is_scale_invariant(x in -5.0..5.0f64, y in 1.0..8.0f64,
                                         pan in -0.5..0.5f64, tilt in -1.4..-0.1f64,
                                         k in 0.2..5.0f64) {
            let cam = CameraModel::default();
            let g = GimbalState::new(pan, tilt, 0.3).unwrap();
            let uav = UavPose::new(0.3, -0.2, 1.8288).unwrap();
            let uav_k = UavPose::new(0.3 * k, -0.2 * k, 1.8288 * k).unwrap();
            let p1 = project([x, y, 0.0], &uav, &g, &cam);
            let p2 = project([k * x, k * y, 0.0], &uav_k, &g, &cam);
            prop_assert_eq!(p1.visible, p2.visible);
            prop_assert!((p1.point.x - p2.point.x).abs() <= 1e-9 * p1.point.x.abs().max(1.0));
            prop_assert!((p1.point.y - p2.point.y).abs() <= 1e-9 * p1.point.y.abs().max(1.0));
        }

        #[test]
        fn gimbal_delta_bounded(yaw in -1.0..1.0f64, pitch in -1.0..1.0f64, tilt in -1.5..0.0f64) {
            let g = GimbalState::new(0.0, tilt, 0.3).unwrap();
            let dt = DEFAULT_DT_S;
            let n = gimbal_step(g, GimbalCommand::new(yaw, pitch), dt).state;
            prop_assert!((n.pan_unwrapped() - g.pan_unwrapped()).abs() <= 0.3 * dt + 1e-15);
            prop_assert!((n.tilt() - g.tilt()).abs() <= 0.3 * dt + 1e-15);
        }
    }
}
