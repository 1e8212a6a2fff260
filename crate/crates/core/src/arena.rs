//! Test arenas as waypoint paths, their on-disk format, and a pure-pursuit
//! driver that steers the USV along them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::sim::{wrap_angle, UsvState};

pub const ARENA_FORMAT_VERSION: u32 = 1;

const ARENA_1_TOML: &str = include_str!("../arenas/arena1.toml");
const ARENA_2_TOML: &str = include_str!("../arenas/arena2.toml");

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("unknown arena id {0}; expected 1 or 2")]
    UnknownArena(u32),
    #[error("a path needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {0} and {1} coincide")]
    RepeatedWaypoint(usize, usize),
    #[error("unsupported arena file version {0}")]
    UnsupportedVersion(u32),
    #[error("arena file: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Polyline the USV follows once, from the first waypoint to the last (and
/// back to the first when `closed`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path<T> {
    waypoints: Vec<[T; 2]>,
    closed: bool,
}

impl<T: Scalar> Path<T> {
    pub fn new(waypoints: Vec<[T; 2]>, closed: bool) -> Result<Self, ArenaError> {
        if waypoints.len() < 2 {
            return Err(ArenaError::TooFewWaypoints(waypoints.len()));
        }
        let n = waypoints.len();
        for i in 0..n {
            let j = i + 1;
            if j == n && !closed {
                break;
            }
            let j = j % n;
            if waypoints[i] == waypoints[j] {
                return Err(ArenaError::RepeatedWaypoint(i, j));
            }
        }
        Ok(Self { waypoints, closed })
    }

    pub fn waypoints(&self) -> &[[T; 2]] {
        &self.waypoints
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Vertices in traversal order; a closed path repeats its first vertex.
    pub fn route(&self) -> Vec<[T; 2]> {
        let mut r = self.waypoints.clone();
        if self.closed {
            r.push(self.waypoints[0]);
        }
        r
    }

    pub fn length(&self) -> T {
        self.route()
            .windows(2)
            .fold(T::zero(), |acc, w| acc + dist(w[0], w[1]))
    }

    /// Copy with every waypoint shifted sideways by `offsets[i]` meters along
    /// the local path normal.
    pub fn with_lateral_offsets(&self, offsets: &[T]) -> Path<T> {
        let n = self.waypoints.len();
        let wp = &self.waypoints;
        let moved = (0..n)
            .map(|i| {
                let prev = if i > 0 {
                    wp[i - 1]
                } else if self.closed {
                    wp[n - 1]
                } else {
                    wp[i]
                };
                let next = if i + 1 < n {
                    wp[i + 1]
                } else if self.closed {
                    wp[0]
                } else {
                    wp[i]
                };
                let (dx, dy) = (next[0] - prev[0], next[1] - prev[1]);
                let len = dx.hypot(dy);
                let off = offsets.get(i).copied().unwrap_or_else(T::zero);
                if len == T::zero() {
                    return wp[i];
                }
                [wp[i][0] - dy / len * off, wp[i][1] + dx / len * off]
            })
            .collect();
        Path {
            waypoints: moved,
            closed: self.closed,
        }
    }
}

fn dist<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// On-disk arena definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaFile {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub closed: bool,
    pub waypoints_m: Vec<[f64; 2]>,
}

impl ArenaFile {
    pub fn parse(text: &str) -> Result<Self, ArenaError> {
        let file: ArenaFile = toml::from_str(text)?;
        if file.version != ARENA_FORMAT_VERSION {
            return Err(ArenaError::UnsupportedVersion(file.version));
        }
        Ok(file)
    }

    pub fn to_path<T: Scalar>(&self) -> Result<Path<T>, ArenaError> {
        Path::new(
            self.waypoints_m
                .iter()
                .map(|&[x, y]| [T::lit(x), T::lit(y)])
                .collect(),
            self.closed,
        )
    }
}

/// Source text of a built-in arena definition.
pub fn arena_source(arena_id: u32) -> Result<&'static str, ArenaError> {
    match arena_id {
        1 => Ok(ARENA_1_TOML),
        2 => Ok(ARENA_2_TOML),
        other => Err(ArenaError::UnknownArena(other)),
    }
}

pub fn build_arena<T: Scalar>(arena_id: u32) -> Result<Path<T>, ArenaError> {
    ArenaFile::parse(arena_source(arena_id)?)?.to_path()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PursuitParams<T> {
    pub lookahead: T,
    pub max_rudder_rate: T,
}

impl<T: Scalar> Default for PursuitParams<T> {
    fn default() -> Self {
        Self {
            lookahead: T::lit(0.4),
            max_rudder_rate: T::lit(3.0),
        }
    }
}

/// Pure-pursuit rudder toward `target`: curvature `2 sin(α) / L` scaled by
/// speed and saturated. Positive turns to port (counterclockwise).
pub fn steer_toward<T: Scalar>(s: &UsvState<T>, target: [T; 2], max_rudder_rate: T) -> T {
    let (dx, dy) = (target[0] - s.x, target[1] - s.y);
    let l = dx.hypot(dy);
    if l == T::zero() {
        return T::zero();
    }
    let alpha = wrap_angle(dy.atan2(dx) - s.heading);
    let rate = s.speed * T::lit(2.0) * alpha.sin() / l;
    // Behind the vehicle the curvature law weakens; turn at full rate instead.
    let rate = if alpha.abs() > T::FRAC_PI_2() {
        max_rudder_rate * alpha.signum()
    } else {
        rate
    };
    rate.max(-max_rudder_rate).min(max_rudder_rate)
}

/// Closest point on the route to `(x, y)` as `(segment, arc length,
/// distance)`. Only segments from `first` onward are searched, and with
/// `horizon` set, only those starting before that arc length.
fn project_on_route<T: Scalar>(
    route: &[[T; 2]],
    x: T,
    y: T,
    first: usize,
    horizon: Option<T>,
) -> (usize, T, T) {
    let mut best = (first, T::zero(), T::infinity());
    let mut arc = T::zero();
    for (i, w) in route.windows(2).enumerate() {
        let seg = dist(w[0], w[1]);
        if i < first {
            arc = arc + seg;
            continue;
        }
        if horizon.is_some_and(|h| arc > h) {
            break;
        }
        let (ex, ey) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
        let u = (((x - w[0][0]) * ex + (y - w[0][1]) * ey) / (seg * seg))
            .max(T::zero())
            .min(T::one());
        let (px, py) = (w[0][0] + ex * u, w[0][1] + ey * u);
        let d = (x - px).hypot(y - py);
        if d < best.2 {
            best = (i, arc + seg * u, d);
        }
        arc = arc + seg;
    }
    best
}

fn point_at_arc<T: Scalar>(route: &[[T; 2]], s: T) -> [T; 2] {
    let mut acc = T::zero();
    for w in route.windows(2) {
        let seg = dist(w[0], w[1]);
        if acc + seg >= s {
            let u = ((s - acc) / seg).max(T::zero()).min(T::one());
            return [
                w[0][0] + (w[1][0] - w[0][0]) * u,
                w[0][1] + (w[1][1] - w[0][1]) * u,
            ];
        }
        acc = acc + seg;
    }
    *route.last().expect("route has vertices")
}

/// Stateless pure pursuit: projects onto the whole path and chases the point
/// `lookahead` meters further along. Returns 0 once the end of the route is
/// within reach and there is nothing left to chase.
pub fn pursue<T: Scalar>(s: &UsvState<T>, path: &Path<T>, params: &PursuitParams<T>) -> T {
    let route = path.route();
    let total = path.length();
    let (_, arc, _) = project_on_route(&route, s.x, s.y, 0, None);
    if arc + params.lookahead >= total
        && dist([s.x, s.y], route[route.len() - 1]) <= params.lookahead
    {
        return T::zero();
    }
    let target = point_at_arc(&route, (arc + params.lookahead).min(total));
    steer_toward(s, target, params.max_rudder_rate)
}

/// Pure pursuit with monotone progress along the route, so self-approaching
/// paths (zig-zags, closed circuits) are followed in order.
#[derive(Debug, Clone)]
pub struct PathFollower<T> {
    route: Vec<[T; 2]>,
    total: T,
    params: PursuitParams<T>,
    segment: usize,
    progress: T,
    finished: bool,
}

impl<T: Scalar> PathFollower<T> {
    pub fn new(path: &Path<T>, params: PursuitParams<T>) -> Self {
        Self {
            route: path.route(),
            total: path.length(),
            params,
            segment: 0,
            progress: T::zero(),
            finished: false,
        }
    }

    /// Start pose: first waypoint, facing the second.
    pub fn start_state(&self, speed: T) -> UsvState<T> {
        let [a, b] = [self.route[0], self.route[1]];
        UsvState::new(a[0], a[1], (b[1] - a[1]).atan2(b[0] - a[0]), speed)
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn progress(&self) -> T {
        self.progress
    }

    /// Rudder rate for the current state; latches `finished` once the route
    /// end is reached.
    pub fn steer(&mut self, s: &UsvState<T>) -> T {
        if self.finished {
            return T::zero();
        }
        let horizon = Some(self.progress + self.params.lookahead * T::lit(4.0));
        let (seg, arc, _) = project_on_route(&self.route, s.x, s.y, self.segment, horizon);
        if arc >= self.progress {
            self.segment = seg;
            self.progress = arc;
        }
        if self.total - self.progress <= self.params.lookahead * T::lit(0.1) {
            self.finished = true;
            return T::zero();
        }
        let target = point_at_arc(
            &self.route,
            (self.progress + self.params.lookahead).min(self.total),
        );
        steer_toward(s, target, self.params.max_rudder_rate)
    }
}
