//! Trust-region LP and parametric LP construction.
//!
//! Both subproblems share the feasible-set shape
//!
//! ```text
//!     minimize     c' w
//!     subject to   C w + g(ŵ) + δ + J P_y (w - ŵ) = 0
//!                  A w + b <= 0
//!                  ‖P_y (w - ŵ)‖_∞ <= Δ
//! ```
//!
//! with `δ = 0` for the trust-region LP. Single-entry rows of `A` are passed to the LP as
//! variable bounds and intersected with the trust-region box; multipliers of those rows are
//! recovered from the bound multipliers. The LP is anchored at `ŵ`, so variables that do
//! not influence the objective stay where they are.

use nalgebra::DVector;

use crate::lp::{LpProblem, LpSolution};
use crate::nlp::{Linearization, NlpProblem};

/// An LP subproblem together with the bookkeeping needed to map its multipliers back onto
/// the rows of the nonlinear program.
#[derive(Debug, Clone)]
pub struct TrustRegionLp {
    pub lp: LpProblem,
    /// For each variable, the `A` row providing its active lower bound (if the trust region
    /// is not strictly tighter).
    lower_row: Vec<Option<usize>>,
    upper_row: Vec<Option<usize>>,
    general_rows: Vec<usize>,
}

impl TrustRegionLp {
    /// Multipliers `(λ, π)` of the nonlinear program for the Lagrangian
    /// `c'w + λ'(C w + g) + π'(A w + b)` recovered from an LP solution.
    pub fn nlp_multipliers(
        &self,
        p: &NlpProblem,
        sol: &LpSolution,
    ) -> (DVector<f64>, DVector<f64>) {
        let lambda = -&sol.duals_eq;
        let mut pi = DVector::zeros(p.num_ineq());
        for (k, &r) in self.general_rows.iter().enumerate() {
            pi[r] = sol.duals_ineq[k];
        }
        for j in 0..p.num_vars() {
            let z = sol.reduced_costs[j];
            let row = if z > 0.0 {
                self.lower_row[j]
            } else if z < 0.0 {
                self.upper_row[j]
            } else {
                None
            };
            if let Some(r) = row {
                pi[r] = z.abs() / p.ineq_matrix[(r, j)].abs();
            }
        }
        (lambda, pi)
    }
}

/// Trust-region LP around the linearization point.
pub fn build_trust_region_lp(lin: &Linearization, p: &NlpProblem, radius: f64) -> TrustRegionLp {
    build(lin, p, None, radius)
}

/// Parametric LP with the higher-order constraint term `δ` held fixed.
pub fn build_plp(
    delta: &DVector<f64>,
    lin: &Linearization,
    p: &NlpProblem,
    radius: f64,
) -> TrustRegionLp {
    build(lin, p, Some(delta), radius)
}

fn build(
    lin: &Linearization,
    p: &NlpProblem,
    delta: Option<&DVector<f64>>,
    radius: f64,
) -> TrustRegionLp {
    debug_assert!(radius > 0.0);
    let base = &lin.base_point;
    let n = p.num_vars();
    let eq_matrix = &p.eq_linear + &lin.fixed_jacobian;
    let mut eq_rhs = &lin.fixed_jacobian * base - &lin.g_at_base;
    if let Some(d) = delta {
        eq_rhs -= d;
    }

    let boxes = &p.boxes;
    let rows = &boxes.general_rows;
    let ineq_matrix = p.ineq_matrix.select_rows(rows.iter());
    let ineq_rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&r| p.ineq_rhs[r]));

    let mut lower = DVector::from_column_slice(&boxes.lower);
    let mut upper = DVector::from_column_slice(&boxes.upper);
    let mut lower_row = boxes.lower_row.clone();
    let mut upper_row = boxes.upper_row.clone();
    for &j in p.partition.y_indices() {
        let (tr_lo, tr_hi) = (base[j] - radius, base[j] + radius);
        if tr_lo > lower[j] {
            lower[j] = tr_lo;
            lower_row[j] = None;
        }
        if tr_hi < upper[j] {
            upper[j] = tr_hi;
            upper_row[j] = None;
        }
        if lower[j] > upper[j] {
            // base point outside its own bound by more than the radius
            let v = base[j].clamp(boxes.lower[j], boxes.upper[j]);
            lower[j] = v;
            upper[j] = v;
        }
    }
    debug_assert_eq!(lower.len(), n);

    TrustRegionLp {
        lp: LpProblem {
            cost: p.cost.clone(),
            eq_matrix,
            eq_rhs,
            ineq_matrix,
            ineq_rhs,
            lower,
            upper,
            anchor: Some(base.clone()),
        },
        lower_row,
        upper_row,
        general_rows: rows.clone(),
    }
}
