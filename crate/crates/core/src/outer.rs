//! Feasible sequential linear programming.
//!
//! Every outer iteration solves the trust-region LP at the current feasible iterate `ŵ`,
//! stops once `|c'(w̄ - ŵ)| <= sigma_outer`, and otherwise projects the
//! LP step `w̄` back onto the feasible set with [`run_inner`]. Since all iterates are
//! feasible the objective itself serves as merit function: the step is judged by
//! `ρ = c'(ŵ - w̃) / c'(ŵ - w̄)`.

use log::{debug, info};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{FslpError, Result};
use crate::inner::{run_inner, InnerParams, InnerStatus, InnerTrace};
use crate::lp::{solve_lp_warm, Basis, LpSolution, LpStatus, LpTolerances};
use crate::nlp::NlpProblem;
use crate::subproblem::{build_trust_region_lp, TrustRegionLp};

/// Tuning constants of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Initial trust-region radius, in `(0, delta_max]`.
    pub delta0: f64,
    /// Upper bound on the radius, at least 1.
    pub delta_max: f64,
    /// Acceptance threshold on `ρ`, in `(0, 1/4)`.
    pub sigma: f64,
    /// Termination threshold on the model decrease.
    pub sigma_outer: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub max_outer_iterations: usize,
    /// Radius below which repeated inner failures are reported as a stall.
    pub radius_floor: f64,
    /// Largest initial infeasibility that a restoration attempt is made for.
    pub restoration_limit: f64,
    #[serde(flatten)]
    pub inner: InnerParams,
    #[serde(skip)]
    pub lp: LpTolerances,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            delta_max: 10.0,
            sigma: 1e-8,
            sigma_outer: 1e-8,
            alpha1: 0.25,
            alpha2: 2.0,
            eta1: 0.25,
            eta2: 0.75,
            max_outer_iterations: 500,
            radius_floor: 1e-16,
            restoration_limit: 1e-3,
            inner: InnerParams::default(),
            lp: LpTolerances::default(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(FslpError::Config(m.to_string()));
        if self.delta_max < 1.0 {
            return fail("delta_max must be at least 1");
        }
        if !(self.delta0 > 0.0 && self.delta0 <= self.delta_max) {
            return fail("delta0 must lie in (0, delta_max]");
        }
        if !(self.sigma > 0.0 && self.sigma < 0.25) {
            return fail("sigma must lie in (0, 1/4)");
        }
        if !(self.sigma_outer > 0.0 && self.sigma_outer < 1e-5) {
            return fail("sigma_outer must lie in (0, 1e-5)");
        }
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0 && self.alpha2 > 1.0 && self.alpha2.is_finite())
        {
            return fail("need 0 < alpha1 < 1 < alpha2 < inf");
        }
        if !(self.eta1 > 0.0 && self.eta1 < self.eta2 && self.eta2 < 1.0) {
            return fail("need 0 < eta1 < eta2 < 1");
        }
        if self.max_outer_iterations == 0 {
            return fail("max_outer_iterations must be positive");
        }
        if self.radius_floor.is_nan() || self.radius_floor <= 0.0 {
            return fail("radius_floor must be positive");
        }
        self.inner.validate()
    }
}

/// Inner-loop outcome as recorded in the outer log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerRecordStatus {
    Ran(InnerStatus),
    NotRun,
}

impl InnerRecordStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            InnerRecordStatus::Ran(s) => s.as_str(),
            InnerRecordStatus::NotRun => "not_run",
        }
    }
}

/// One row of the outer iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `c'ŵ_k`.
    pub objective: f64,
    /// `h(ŵ_k)`.
    pub infeasibility: f64,
    /// `Δ_k`.
    pub radius: f64,
    /// `m = c'(w̄_k - ŵ_k)`.
    pub model_decrease: f64,
    pub rho: Option<f64>,
    pub accepted: bool,
    /// Parametric LP solves of the inner iterations.
    pub inner_iterations: usize,
    pub inner_status: InnerRecordStatus,
    /// `‖P_y(w̄_k - ŵ_k)‖_∞`.
    pub step_norm: f64,
    /// `‖s_ocp(ŵ_k)‖_∞`.
    pub ocp_slack_norm: f64,
    /// Projection ratio of the accepted or rejected inner result, if any.
    pub projection_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    InnerFailureStall,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::InnerFailureStall => "inner_failure_stall",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub final_point: DVector<f64>,
    /// Multipliers `(λ, π)` from the last trust-region LP.
    pub final_duals: (DVector<f64>, DVector<f64>),
    pub history: Vec<IterationRecord>,
    /// `ŵ_0` followed by every accepted iterate.
    pub iterates: Vec<DVector<f64>>,
    /// Inner traces keyed by outer iteration.
    pub inner_traces: Vec<(usize, InnerTrace)>,
    /// Evaluations of `g` during the solve.
    pub constraint_evaluations: usize,
    pub jacobian_evaluations: usize,
    pub lp_solves: usize,
    /// Feasibility restoration was applied to the starting point.
    pub restored_start: bool,
}

impl SolveResult {
    pub fn accepted_steps(&self) -> usize {
        self.history.iter().filter(|r| r.accepted).count()
    }

    /// First outer iteration whose iterate has all penalized slacks at most `tol`.
    pub fn first_zero_slack_iteration(&self, tol: f64) -> Option<usize> {
        self.history
            .iter()
            .find(|r| r.ocp_slack_norm <= tol)
            .map(|r| r.k)
    }
}

/// `ρ = c'(ŵ - w̃) / c'(ŵ - w̄)`.
pub fn tr_ratio(
    cost: &DVector<f64>,
    w_hat: &DVector<f64>,
    w_bar: &DVector<f64>,
    w_tilde: &DVector<f64>,
) -> f64 {
    cost.dot(&(w_hat - w_tilde)) / cost.dot(&(w_hat - w_bar))
}

/// Next trust-region radius after an inner run that produced a projection (`Some(ρ)`) or
/// failed (`None`).
pub fn update_radius(
    params: &SolverParams,
    rho: Option<f64>,
    step_norm: f64,
    radius: f64,
    hit_boundary: bool,
) -> f64 {
    match rho {
        None => params.alpha1 * step_norm,
        Some(r) if r < params.eta1 => params.alpha1 * step_norm,
        Some(r) if r > params.eta2 && hit_boundary => {
            (params.alpha2 * radius).min(params.delta_max)
        }
        Some(_) => radius,
    }
}

/// Runs the outer loop from the feasible point `w0`.
pub fn solve(p: &NlpProblem, w0: &DVector<f64>, params: &SolverParams) -> Result<SolveResult> {
    params.validate()?;
    if w0.len() != p.num_vars() {
        return Err(FslpError::Dimension {
            what: "initial point",
            expected: p.num_vars(),
            got: w0.len(),
        });
    }
    let evals0 = p.constraint_evaluations();
    let jac0 = p.jacobian_evaluations();
    let sigma_inner = params.inner.sigma_inner;

    let mut w_hat = w0.clone();
    let mut restored_start = false;
    let h0 = p.infeasibility(&w_hat)?;
    if h0 > sigma_inner {
        if h0 > params.restoration_limit {
            return Err(FslpError::InfeasibleStart(h0));
        }
        w_hat = restore(p, &w_hat, params).ok_or(FslpError::InfeasibleStart(h0))?;
        restored_start = true;
    }

    let mut radius = params.delta0;
    let mut history = Vec::new();
    let mut iterates = vec![w_hat.clone()];
    let mut inner_traces = Vec::new();
    let mut lp_solves = 0;
    let mut warm: Option<Basis> = None;
    let mut last_duals = (DVector::zeros(p.num_eq()), DVector::zeros(p.num_ineq()));
    let mut status = SolveStatus::MaxIterations;

    for k in 0..params.max_outer_iterations {
        if radius < params.radius_floor {
            status = SolveStatus::InnerFailureStall;
            break;
        }
        let lin = p.linearize(&w_hat)?;
        let h_hat = p.infeasibility_with(&w_hat, &lin.g_at_base);
        let tr = build_trust_region_lp(&lin, p, radius);
        let sol = solve_subproblem(&tr, params, warm.as_ref())?;
        lp_solves += 1;
        last_duals = tr.nlp_multipliers(p, &sol);
        let w_bar = sol.primal.clone();
        let step = &w_bar - &w_hat;
        let model = p.cost.dot(&step);
        let step_norm = p.partition.y_max_norm(&step);
        let mut record = IterationRecord {
            k,
            objective: p.cost.dot(&w_hat),
            infeasibility: h_hat,
            radius,
            model_decrease: model,
            rho: None,
            accepted: false,
            inner_iterations: 0,
            inner_status: InnerRecordStatus::NotRun,
            step_norm,
            ocp_slack_norm: p.partition.ocp_slack_norm(&w_hat),
            projection_ratio: None,
        };
        if model.abs() <= params.sigma_outer {
            history.push(record);
            status = SolveStatus::Optimal;
            break;
        }

        let outcome = run_inner(
            p,
            &lin,
            &w_bar,
            radius,
            &params.inner,
            &params.lp,
            sol.basis.as_ref(),
        )?;
        lp_solves += outcome.trace.plp_solves;
        record.inner_iterations = outcome.trace.plp_solves;
        record.inner_status = InnerRecordStatus::Ran(outcome.trace.status);
        record.projection_ratio = outcome.trace.iterates.last().map(|it| it.projection_ratio);
        let hit_boundary = (step_norm - radius).abs() <= 1e-9 * radius.max(1.0);
        match outcome.point {
            None => {
                radius = update_radius(params, None, step_norm, radius, hit_boundary);
            }
            Some(w_tilde) => {
                let rho = tr_ratio(&p.cost, &w_hat, &w_bar, &w_tilde);
                record.rho = Some(rho);
                radius = update_radius(params, Some(rho), step_norm, radius, hit_boundary);
                if rho > params.sigma {
                    record.accepted = true;
                    w_hat = w_tilde;
                    iterates.push(w_hat.clone());
                }
            }
        }
        debug!(
            "k={k} obj={:.10e} m={model:.3e} rho={:?} inner={}({}) radius->{radius:.3e}",
            record.objective,
            record.rho,
            record.inner_iterations,
            record.inner_status.as_str()
        );
        inner_traces.push((k, outcome.trace));
        warm = sol.basis;
        history.push(record);
    }
    info!(
        "fslp finished: {} after {} iterations, objective {:.10e}",
        status.as_str(),
        history.len(),
        p.cost.dot(&w_hat)
    );

    Ok(SolveResult {
        status,
        final_point: w_hat,
        final_duals: last_duals,
        history,
        iterates,
        inner_traces,
        constraint_evaluations: p.constraint_evaluations() - evals0,
        jacobian_evaluations: p.jacobian_evaluations() - jac0,
        lp_solves,
        restored_start,
    })
}

fn solve_subproblem(
    tr: &TrustRegionLp,
    params: &SolverParams,
    warm: Option<&Basis>,
) -> Result<LpSolution> {
    let sol = solve_lp_warm(&tr.lp, &params.lp, warm)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        other => Err(FslpError::Internal(format!(
            "trust-region LP at a feasible iterate returned {other:?}"
        ))),
    }
}

/// One round of feasibility iterations around a slightly infeasible start.
fn restore(p: &NlpProblem, w0: &DVector<f64>, params: &SolverParams) -> Option<DVector<f64>> {
    let lin = p.linearize(w0).ok()?;
    let inner = InnerParams {
        // the ratio test is meaningless without an LP step
        ratio_accept: f64::MAX / 2.0,
        ratio_abort: f64::MAX,
        ..params.inner
    };
    let out = run_inner(p, &lin, w0, params.delta0, &inner, &params.lp, None).ok()?;
    out.point
}
