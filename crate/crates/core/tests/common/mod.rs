//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's geometry or projection code.
#![allow(dead_code)]

use nalgebra::{Matrix3, Matrix3x4, Rotation3, Vector3, Vector4};

/// `x²/a² + y²/b²` by direct arithmetic.
pub fn eq1(x: f64, y: f64, a: f64, b: f64) -> f64 {
    (x * x) / (a * a) + (y * y) / (b * b)
}

/// Pinhole camera as a 3x4 homogeneous projection `K [Rᵀ | -Rᵀc]`.
///
/// The camera body starts level and looking north (right = east, up = z),
/// tilts about its right axis, then pans clockwise about world z.
pub fn camera_matrix(cam: [f64; 3], pan: f64, tilt: f64, hfov: f64, width: f64) -> Matrix3x4<f64> {
    let base = Matrix3::from_columns(&[
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.0, 1.0, 0.0),
    ]);
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), -pan).matrix()
        * Rotation3::from_axis_angle(&Vector3::x_axis(), tilt).matrix()
        * base;
    let c = Vector3::from(cam);
    let rt = r.transpose();
    let t = -(rt * c);
    let mut ext = Matrix3x4::zeros();
    ext.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    ext.set_column(3, &t);
    let f = (width / 2.0) / (hfov / 2.0).tan();
    let k = Matrix3::new(f, 0.0, 0.0, 0.0, f, 0.0, 0.0, 0.0, 1.0);
    k * ext
}

/// Centered y-up image point of a world point, `None` behind the camera.
pub fn project(m: &Matrix3x4<f64>, p: [f64; 3]) -> Option<(f64, f64)> {
    let h = m * Vector4::new(p[0], p[1], p[2], 1.0);
    (h.z > 0.0).then(|| (h.x / h.z, h.y / h.z))
}

pub struct Pose {
    pub cam: [f64; 3],
    pub hfov: f64,
    pub width: f64,
    pub a: f64,
    pub b: f64,
}

impl Pose {
    /// Same rotation sequence as [`camera_matrix`], unrolled: undo the pan
    /// about z, then the tilt about x.
    pub fn p_at(&self, target: [f64; 3], pan: f64, tilt: f64) -> Option<f64> {
        let d = [
            target[0] - self.cam[0],
            target[1] - self.cam[1],
            target[2] - self.cam[2],
        ];
        let (sp, cp) = pan.sin_cos();
        let (st, ct) = tilt.sin_cos();
        let (ux, uy) = (d[0] * cp - d[1] * sp, d[0] * sp + d[1] * cp);
        let fwd = uy * ct + d[2] * st;
        let up = -uy * st + d[2] * ct;
        if fwd <= 0.0 {
            return None;
        }
        let f = (self.width / 2.0) / (self.hfov / 2.0).tan();
        Some(eq1(f * ux / fwd, f * up / fwd, self.a, self.b))
    }

    /// Smallest `|Δpan| + |Δtilt|` that brings `target` inside the ellipse,
    /// by grid search refined around the best cell. Tilt stays in
    /// `[-π/2, 0]`.
    pub fn min_rotation(&self, target: [f64; 3], pan: f64, tilt: f64) -> f64 {
        let inside = |dp: f64, dt: f64| {
            let t = tilt + dt;
            (-std::f64::consts::FRAC_PI_2..=0.0).contains(&t)
                && self.p_at(target, pan + dp, t).is_some_and(|p| p <= 1.0)
        };
        let search = |c: (f64, f64), half: f64, step: f64| {
            let n = (half / step).round() as i64;
            let mut best: Option<(f64, f64, f64)> = None;
            for i in -n..=n {
                for j in -n..=n {
                    let (dp, dt) = (c.0 + i as f64 * step, c.1 + j as f64 * step);
                    let cost = dp.abs() + dt.abs();
                    if best.is_some_and(|b| cost >= b.0) {
                        continue;
                    }
                    if inside(dp, dt) {
                        best = Some((cost, dp, dt));
                    }
                }
            }
            best
        };
        let coarse = search((0.0, 0.0), 1.2, 0.01).expect("target reachable");
        let mut best = coarse;
        let mut step = 0.01;
        for _ in 0..3 {
            let fine = search((best.1, best.2), step * 2.0, step / 10.0)
                .expect("refinement keeps a solution");
            if fine.0 < best.0 {
                best = fine;
            }
            step /= 10.0;
        }
        best.0
    }
}
