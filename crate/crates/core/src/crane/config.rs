use serde::{Deserialize, Serialize};

use crate::error::{FslpError, Result};

/// Closed interval `[lower, upper]`; either end may be infinite.
pub type Interval = [f64; 2];

/// Box constraints on the crane variables, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CraneBounds {
    pub x_c: Interval,
    pub x_c_dot: Interval,
    pub l: Interval,
    pub l_dot: Interval,
    pub theta: Interval,
    pub theta_dot: Interval,
    pub x_c_ddot: Interval,
    pub l_ddot: Interval,
    /// Horizon length `T` in seconds.
    pub time: Interval,
}

impl Default for CraneBounds {
    fn default() -> Self {
        Self {
            x_c: [-0.1, 0.6],
            x_c_dot: [-0.4, 0.4],
            l: [1e-2, 2.0],
            l_dot: [-0.25, 0.25],
            theta: [-0.75, 0.75],
            theta_dot: [f64::NEG_INFINITY, f64::INFINITY],
            x_c_ddot: [-5.0, 5.0],
            l_ddot: [-5.0, 5.0],
            time: [0.1, 10.0],
        }
    }
}

impl CraneBounds {
    pub fn state(&self) -> [Interval; 6] {
        [
            self.x_c,
            self.x_c_dot,
            self.l,
            self.l_dot,
            self.theta,
            self.theta_dot,
        ]
    }

    pub fn control(&self) -> [Interval; 2] {
        [self.x_c_ddot, self.l_ddot]
    }

    fn all(&self) -> [(&'static str, Interval); 9] {
        [
            ("x_c", self.x_c),
            ("x_c_dot", self.x_c_dot),
            ("l", self.l),
            ("l_dot", self.l_dot),
            ("theta", self.theta),
            ("theta_dot", self.theta_dot),
            ("x_c_ddot", self.x_c_ddot),
            ("l_ddot", self.l_ddot),
            ("time", self.time),
        ]
    }
}

/// Time-optimal overhead crane problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CraneConfig {
    /// Number of shooting intervals `N`.
    pub horizon: usize,
    /// RK4 substeps per shooting interval.
    pub rk4_substeps: usize,
    /// m/s^2
    pub gravity: f64,
    /// Payload radius in m.
    pub r_load: f64,
    /// Payload rest position A in m.
    pub start_payload: [f64; 2],
    /// Payload rest position B in m.
    pub end_payload: [f64; 2],
    /// Rectangle corners in order around the boundary.
    pub obstacle_vertices: [[f64; 2]; 4],
    /// Objective weight of every endpoint slack.
    pub slack_penalty: f64,
    /// Horizon of the initial guess in s.
    pub t_init: f64,
    /// Constant control `(ẍ_c, l̈)` of the initial guess in m/s^2.
    pub u_init: [f64; 2],
    pub bounds: CraneBounds,
}

impl Default for CraneConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            rk4_substeps: 20,
            gravity: 9.81,
            r_load: 0.08,
            start_payload: [0.0, -0.6],
            end_payload: [0.5, -0.6],
            obstacle_vertices: [[0.2, -0.55], [0.3, -0.55], [0.3, -0.35], [0.2, -0.35]],
            slack_penalty: 1e5,
            t_init: 2.5,
            u_init: [0.0, 0.1],
            bounds: CraneBounds::default(),
        }
    }
}

impl CraneConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(FslpError::Config(m));
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if self.rk4_substeps == 0 {
            return fail("rk4_substeps must be at least 1".into());
        }
        if !(self.slack_penalty > 0.0 && self.slack_penalty.is_finite()) {
            return fail("slack_penalty must be positive".into());
        }
        if !(self.r_load >= 0.0 && self.r_load.is_finite()) {
            return fail("r_load must be nonnegative".into());
        }
        if !(self.gravity.is_finite() && self.t_init > 0.0 && self.t_init.is_finite()) {
            return fail("gravity and t_init must be finite, t_init positive".into());
        }
        for (name, [lo, hi]) in self.bounds.all() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return fail(format!(
                    "bounds.{name}: need lower < upper, got [{lo}, {hi}]"
                ));
            }
        }
        if self.bounds.l[0] <= 0.0 {
            return fail("bounds.l: hoist length must stay positive".into());
        }
        if self.bounds.time[0] <= 0.0 {
            return fail("bounds.time: horizon must stay positive".into());
        }
        Obstacle::new(self.obstacle_vertices).map(|_| ())
    }

    pub fn obstacle(&self) -> Result<Obstacle> {
        Obstacle::new(self.obstacle_vertices)
    }
}

/// A rectangle given by its corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub vertices: [[f64; 2]; 4],
}

impl Obstacle {
    pub fn new(vertices: [[f64; 2]; 4]) -> Result<Self> {
        let edge = |i: usize| {
            let (a, b) = (vertices[i], vertices[(i + 1) % 4]);
            [b[0] - a[0], b[1] - a[1]]
        };
        let len = |e: [f64; 2]| e[0].hypot(e[1]);
        let (e0, e1, e2, e3) = (edge(0), edge(1), edge(2), edge(3));
        let scale = len(e0).max(len(e1));
        let tol = 1e-9 * scale.max(1.0);
        let degenerate = len(e0) <= tol
            || len(e1) <= tol
            || (e0[0] * e1[0] + e0[1] * e1[1]).abs() > tol * scale
            || len([e0[0] + e2[0], e0[1] + e2[1]]) > tol
            || len([e1[0] + e3[0], e1[1] + e3[1]]) > tol
            || vertices.iter().flatten().any(|v| !v.is_finite());
        if degenerate {
            return Err(FslpError::Config(format!(
                "obstacle vertices {vertices:?} do not form a nondegenerate rectangle"
            )));
        }
        Ok(Self { vertices })
    }

    /// Euclidean distance from `p` to the rectangle, zero inside.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let o = self.vertices[0];
        let axis = |i: usize| {
            let v = self.vertices[i];
            let e = [v[0] - o[0], v[1] - o[1]];
            let n = e[0].hypot(e[1]);
            ([e[0] / n, e[1] / n], n)
        };
        let d = [p[0] - o[0], p[1] - o[1]];
        let mut sq = 0.0;
        for (u, n) in [axis(1), axis(3)] {
            let t = d[0] * u[0] + d[1] * u[1];
            let excess = if t < 0.0 {
                -t
            } else if t > n {
                t - n
            } else {
                0.0
            };
            sq += excess * excess;
        }
        sq.sqrt()
    }
}
