//! Multiple-shooting transcription of the time-optimal crane problem.
//!
//! Variables, in order: states `x_0..x_N`, controls `u_0..u_{N-1}`, hyperplanes
//! `(u^h_k, u^c_k)` for `k = 1..N`, horizon `T`; then the endpoint slacks `s_0, s_N` and the
//! obstacle slacks `s_NLP`. Everything before the slacks enters the trust region.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::config::CraneConfig;
use super::dynamics::{
    payload_jacobian, payload_position, rk4_step, rk4_step_sensitivity, Control, CraneDynamics,
    CraneState, State, NU, NX,
};
use crate::error::{FslpError, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, LpTolerances};
use crate::nlp::{ConstraintMap, NlpProblem, VariablePartition};

/// Index map of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TocpLayout {
    pub horizon: usize,
}

impl TocpLayout {
    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }

    /// First index of `x_k`, `k = 0..=N`.
    pub fn state(&self, k: usize) -> usize {
        debug_assert!(k <= self.horizon);
        NX * k
    }

    /// First index of `u_k`, `k = 0..N`.
    pub fn control(&self, k: usize) -> usize {
        debug_assert!(k < self.horizon);
        NX * (self.horizon + 1) + NU * k
    }

    /// First index of `(u^h_k, u^c_k)`, `k = 1..=N`.
    pub fn hyperplane(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.horizon);
        (NX + NU) * self.horizon + NX + 3 * (k - 1)
    }

    pub fn time(&self) -> usize {
        (NX + NU + 3) * self.horizon + NX
    }

    pub fn n_y(&self) -> usize {
        self.time() + 1
    }

    pub fn s0(&self) -> usize {
        self.n_y()
    }

    pub fn s_end(&self) -> usize {
        self.n_y() + NX
    }

    /// Index of the obstacle slack of stage `k = 1..=N`.
    pub fn s_nlp(&self, k: usize) -> usize {
        self.n_y() + 2 * NX + k - 1
    }

    pub fn n_w(&self) -> usize {
        self.n_y() + 2 * NX + self.horizon
    }

    /// Shooting gaps followed by one obstacle row per stage.
    pub fn num_eq(&self) -> usize {
        (NX + 1) * self.horizon
    }

    pub fn obstacle_row(&self, k: usize) -> usize {
        NX * self.horizon + k - 1
    }

    pub fn partition(&self) -> VariablePartition {
        let n_y = self.n_y();
        VariablePartition::new(
            self.n_w(),
            (0..n_y).collect(),
            (n_y..n_y + 2 * NX).collect(),
            (n_y + 2 * NX..self.n_w()).collect(),
        )
        .expect("layout blocks partition the index range")
    }

    pub fn state_of(&self, w: &DVector<f64>, k: usize) -> State {
        State::from_column_slice(&w.as_slice()[self.state(k)..self.state(k) + NX])
    }

    pub fn control_of(&self, w: &DVector<f64>, k: usize) -> Control {
        Control::from_column_slice(&w.as_slice()[self.control(k)..self.control(k) + NU])
    }

    /// Payload positions `p_0..p_N`.
    pub fn payload_path(&self, w: &DVector<f64>) -> Vec<[f64; 2]> {
        (0..=self.horizon)
            .map(|k| payload_position(&self.state_of(w, k)))
            .collect()
    }
}

/// Shooting gaps `F(x_k, u_k, T/N) - x_{k+1}` and obstacle terms `p_k'u^h_k - u^c_k + r_load`.
#[derive(Debug, Clone)]
pub struct CraneConstraints {
    layout: TocpLayout,
    dynamics: CraneDynamics,
    substeps: usize,
    r_load: f64,
}

impl CraneConstraints {
    fn interval(&self, y: &DVector<f64>) -> f64 {
        y[self.layout.time()] / self.layout.horizon as f64
    }
}

impl ConstraintMap for CraneConstraints {
    fn num_inputs(&self) -> usize {
        self.layout.n_y()
    }

    fn num_outputs(&self) -> usize {
        self.layout.num_eq()
    }

    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let lay = &self.layout;
        let h = self.interval(y);
        let mut g = DVector::zeros(lay.num_eq());
        for k in 0..lay.horizon {
            let end = rk4_step(
                &self.dynamics,
                &lay.state_of(y, k),
                &lay.control_of(y, k),
                h,
                self.substeps,
            )?;
            let gap = end - lay.state_of(y, k + 1);
            g.rows_mut(NX * k, NX).copy_from(&gap);
        }
        for k in 1..=lay.horizon {
            let p = payload_position(&lay.state_of(y, k));
            let j = lay.hyperplane(k);
            g[lay.obstacle_row(k)] = p[0] * y[j] + p[1] * y[j + 1] - y[j + 2] + self.r_load;
        }
        Ok(g)
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let lay = &self.layout;
        let n = lay.horizon as f64;
        let h = self.interval(y);
        let mut jac = DMatrix::zeros(lay.num_eq(), lay.n_y());
        for k in 0..lay.horizon {
            let s = rk4_step_sensitivity(
                &self.dynamics,
                &lay.state_of(y, k),
                &lay.control_of(y, k),
                h,
                self.substeps,
            )?;
            let r = NX * k;
            jac.view_mut((r, lay.state(k)), (NX, NX)).copy_from(&s.d_x);
            jac.view_mut((r, lay.control(k)), (NX, NU))
                .copy_from(&s.d_u);
            jac.view_mut((r, lay.time()), (NX, 1))
                .copy_from(&(s.d_h / n));
            for i in 0..NX {
                jac[(r + i, lay.state(k + 1) + i)] = -1.0;
            }
        }
        for k in 1..=lay.horizon {
            let x = lay.state_of(y, k);
            let p = payload_position(&x);
            let jp = payload_jacobian(&x);
            let j = lay.hyperplane(k);
            let r = lay.obstacle_row(k);
            for c in 0..NX {
                jac[(r, lay.state(k) + c)] = y[j] * jp[(0, c)] + y[j + 1] * jp[(1, c)];
            }
            jac[(r, j)] = p[0];
            jac[(r, j + 1)] = p[1];
            jac[(r, j + 2)] = -1.0;
        }
        Ok(jac)
    }
}

/// The transcribed problem with its layout and configuration.
#[derive(Debug)]
pub struct CraneProblem {
    pub nlp: NlpProblem,
    pub layout: TocpLayout,
    pub config: CraneConfig,
}

impl CraneProblem {
    pub fn start_state(&self) -> State {
        let [px, py] = self.config.start_payload;
        CraneState::at_rest_below(px, py).to_vector()
    }

    pub fn end_state(&self) -> State {
        let [px, py] = self.config.end_payload;
        CraneState::at_rest_below(px, py).to_vector()
    }

    /// Endpoint slacks `|x_0 - x̄_0|`, `|x_N - x̄_N|` and obstacle slacks pinned by their
    /// equalities, written into `w`.
    pub fn set_minimal_slacks(&self, w: &mut DVector<f64>) -> Result<()> {
        let lay = &self.layout;
        let d0 = lay.state_of(w, 0) - self.start_state();
        let dn = lay.state_of(w, lay.horizon) - self.end_state();
        for i in 0..NX {
            w[lay.s0() + i] = d0[i].abs();
            w[lay.s_end() + i] = dn[i].abs();
        }
        for k in 1..=lay.horizon {
            w[lay.s_nlp(k)] = 0.0;
        }
        let g = self.nlp.eval_g(w)?;
        for k in 1..=lay.horizon {
            let s = -g[lay.obstacle_row(k)];
            if s < 0.0 {
                return Err(FslpError::NoFeasibleSlack(format!(
                    "stage {k} violates its separating hyperplane by {:e}",
                    -s
                )));
            }
            w[lay.s_nlp(k)] = s;
        }
        Ok(())
    }

    /// Feasible with all endpoint slacks at most `slack_tol`.
    pub fn is_zero_slack_feasible(
        &self,
        w: &DVector<f64>,
        h_tol: f64,
        slack_tol: f64,
    ) -> Result<bool> {
        Ok(
            self.nlp.partition.ocp_slack_norm(w) <= slack_tol
                && self.nlp.infeasibility(w)? <= h_tol,
        )
    }

    /// `T` of a point.
    pub fn horizon_time(&self, w: &DVector<f64>) -> f64 {
        w[self.layout.time()]
    }
}

/// Builds `min T + μ's_0 + μ's_N` subject to the shooting, obstacle, endpoint and box
/// constraints.
pub fn build_tocp(cfg: &CraneConfig) -> Result<CraneProblem> {
    cfg.validate()?;
    let obstacle = cfg.obstacle()?;
    let lay = TocpLayout::new(cfg.horizon);
    let (n_w, n) = (lay.n_w(), cfg.horizon);

    let mut cost = DVector::zeros(n_w);
    cost[lay.time()] = 1.0;
    for i in 0..NX {
        cost[lay.s0() + i] = cfg.slack_penalty;
        cost[lay.s_end() + i] = cfg.slack_penalty;
    }

    let mut eq_linear = DMatrix::zeros(lay.num_eq(), n_w);
    for k in 1..=n {
        eq_linear[(lay.obstacle_row(k), lay.s_nlp(k))] = 1.0;
    }

    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let [ax, ay] = cfg.start_payload;
    let [bx, by] = cfg.end_payload;
    let targets = [
        (
            lay.state(0),
            lay.s0(),
            CraneState::at_rest_below(ax, ay).to_vector(),
        ),
        (
            lay.state(n),
            lay.s_end(),
            CraneState::at_rest_below(bx, by).to_vector(),
        ),
    ];
    for (x, s, target) in targets {
        for i in 0..NX {
            rows.push((vec![(x + i, 1.0), (s + i, -1.0)], -target[i]));
            rows.push((vec![(x + i, -1.0), (s + i, -1.0)], target[i]));
        }
    }
    for k in 1..=n {
        let j = lay.hyperplane(k);
        for v in obstacle.vertices {
            rows.push((vec![(j, -v[0]), (j + 1, -v[1]), (j + 2, 1.0)], 0.0));
        }
    }
    let mut bound = |j: usize, [lo, hi]: [f64; 2]| {
        if lo.is_finite() {
            rows.push((vec![(j, -1.0)], lo));
        }
        if hi.is_finite() {
            rows.push((vec![(j, 1.0)], -hi));
        }
    };
    let state_bounds = cfg.bounds.state();
    for k in 0..=n {
        for (i, b) in state_bounds.iter().enumerate() {
            bound(lay.state(k) + i, *b);
        }
    }
    let control_bounds = cfg.bounds.control();
    for k in 0..n {
        for (i, b) in control_bounds.iter().enumerate() {
            bound(lay.control(k) + i, *b);
        }
    }
    for k in 1..=n {
        for i in 0..3 {
            bound(lay.hyperplane(k) + i, [-1.0, 1.0]);
        }
    }
    bound(lay.time(), cfg.bounds.time);
    for j in lay.n_y()..n_w {
        bound(j, [0.0, f64::INFINITY]);
    }

    let mut ineq_matrix = DMatrix::zeros(rows.len(), n_w);
    let mut ineq_rhs = DVector::zeros(rows.len());
    for (r, (entries, b)) in rows.into_iter().enumerate() {
        for (j, a) in entries {
            ineq_matrix[(r, j)] = a;
        }
        ineq_rhs[r] = b;
    }

    let constraints = CraneConstraints {
        layout: lay,
        dynamics: CraneDynamics {
            gravity: cfg.gravity,
        },
        substeps: cfg.rk4_substeps,
        r_load: cfg.r_load,
    };
    let nlp = NlpProblem::new(
        cost,
        eq_linear,
        ineq_matrix,
        ineq_rhs,
        Arc::new(constraints),
        lay.partition(),
    )?;
    Ok(CraneProblem {
        nlp,
        layout: lay,
        config: cfg.clone(),
    })
}

/// Hyperplane `(a, c)` with `‖a‖_∞, |c| <= 1` maximizing `c - a'p` subject to `a'v_i >= c`
/// at every vertex; returns the hyperplane and its margin.
pub fn separating_hyperplane(p: [f64; 2], vertices: &[[f64; 2]; 4]) -> Result<([f64; 3], f64)> {
    // variables (a1, a2, c, t): maximize t subject to a'p - c + t <= 0, c - a'v_i <= 0
    let mut a = DMatrix::zeros(5, 4);
    a[(0, 0)] = p[0];
    a[(0, 1)] = p[1];
    a[(0, 2)] = -1.0;
    a[(0, 3)] = 1.0;
    for (i, v) in vertices.iter().enumerate() {
        a[(i + 1, 0)] = -v[0];
        a[(i + 1, 1)] = -v[1];
        a[(i + 1, 2)] = 1.0;
    }
    let lp = LpProblem::new(DVector::from_vec(vec![0.0, 0.0, 0.0, -1.0]))
        .with_inequalities(a, DVector::zeros(5))
        .with_bounds(
            DVector::from_vec(vec![-1.0, -1.0, -1.0, f64::NEG_INFINITY]),
            DVector::from_vec(vec![1.0, 1.0, 1.0, f64::INFINITY]),
        );
    let sol = solve_lp(&lp, &LpTolerances::default())?;
    if sol.status != LpStatus::Optimal {
        return Err(FslpError::Internal(format!(
            "margin LP returned {:?}",
            sol.status
        )));
    }
    let x = &sol.primal;
    Ok(([x[0], x[1], x[2]], x[3]))
}

/// Forward simulation from A at rest with the constant control `u_init` over `t_init`,
/// completed with max-margin hyperplanes and minimal slacks.
pub fn feasible_initialization(problem: &CraneProblem) -> Result<DVector<f64>> {
    let cfg = &problem.config;
    let lay = &problem.layout;
    let obstacle = cfg.obstacle()?;
    let dynamics = CraneDynamics {
        gravity: cfg.gravity,
    };
    let u = Control::new(cfg.u_init[0], cfg.u_init[1]);
    let h = cfg.t_init / cfg.horizon as f64;

    let mut w = DVector::zeros(lay.n_w());
    let mut x = problem.start_state();
    w.rows_mut(lay.state(0), NX).copy_from(&x);
    for k in 0..cfg.horizon {
        w.rows_mut(lay.control(k), NU).copy_from(&u);
        x = rk4_step(&dynamics, &x, &u, h, cfg.rk4_substeps)
            .map_err(|e| FslpError::Initialization(format!("forward simulation failed: {e}")))?;
        w.rows_mut(lay.state(k + 1), NX).copy_from(&x);
    }
    w[lay.time()] = cfg.t_init;

    for k in 1..=cfg.horizon {
        let p = payload_position(&lay.state_of(&w, k));
        let (plane, margin) = separating_hyperplane(p, &obstacle.vertices)?;
        if margin < cfg.r_load {
            return Err(FslpError::Initialization(format!(
                "initial payload path comes within {:.4} m of the obstacle at stage {k} \
                 (load radius {} m)",
                obstacle.distance(p),
                cfg.r_load
            )));
        }
        w.rows_mut(lay.hyperplane(k), 3).copy_from_slice(&plane);
    }
    problem
        .set_minimal_slacks(&mut w)
        .map_err(|e| FslpError::Initialization(e.to_string()))?;
    Ok(w)
}
