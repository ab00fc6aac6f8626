//! Dense linear programming.
//!
//! Problems have the form
//!
//! ```text
//!     minimize     c' w
//!     subject to   E w  = e
//!                  A w + b <= 0
//!                  lower <= w <= upper
//! ```
//!
//! where bounds may be infinite (`f64::NEG_INFINITY` / `f64::INFINITY`). They are solved by a
//! bounded-variable revised primal simplex (see [`solve_lp`]) that returns a vertex solution
//! together with multipliers for every constraint row.

mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::error::{FslpError, Result};

pub use simplex::{solve_lp, solve_lp_warm, Basis};

/// A linear program in bounded standard form.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: DVector<f64>,
    /// Equality rows, `eq_matrix * w = eq_rhs`.
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    /// Inequality rows, `ineq_matrix * w + ineq_rhs <= 0`.
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Preferred resting values of nonbasic variables. Among several optimal vertices the
    /// solver then favours solutions that leave objective-neutral variables at their anchor
    /// instead of driving them onto a bound. Entries are clamped into the bounds.
    pub anchor: Option<DVector<f64>>,
}

impl LpProblem {
    /// A problem with `n` variables, no rows and free bounds.
    pub fn new(cost: DVector<f64>) -> Self {
        let n = cost.len();
        Self {
            cost,
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
            anchor: None,
        }
    }

    pub fn with_equalities(mut self, matrix: DMatrix<f64>, rhs: DVector<f64>) -> Self {
        self.eq_matrix = matrix;
        self.eq_rhs = rhs;
        self
    }

    pub fn with_inequalities(mut self, matrix: DMatrix<f64>, rhs: DVector<f64>) -> Self {
        self.ineq_matrix = matrix;
        self.ineq_rhs = rhs;
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_anchor(mut self, anchor: DVector<f64>) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    /// Checks dimensions, NaN-freeness and `lower <= upper`.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |msg: String| Err(FslpError::MalformedLp(msg));
        if self.eq_matrix.ncols() != n || self.eq_matrix.nrows() != self.eq_rhs.len() {
            return bad(format!(
                "equality block is {}x{} with {} rhs entries for {n} variables",
                self.eq_matrix.nrows(),
                self.eq_matrix.ncols(),
                self.eq_rhs.len()
            ));
        }
        if self.ineq_matrix.ncols() != n || self.ineq_matrix.nrows() != self.ineq_rhs.len() {
            return bad(format!(
                "inequality block is {}x{} with {} rhs entries for {n} variables",
                self.ineq_matrix.nrows(),
                self.ineq_matrix.ncols(),
                self.ineq_rhs.len()
            ));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!(
                "bounds have lengths {}/{} for {n} variables",
                self.lower.len(),
                self.upper.len()
            ));
        }
        if let Some(a) = &self.anchor {
            if a.len() != n || a.iter().any(|v| !v.is_finite()) {
                return bad(format!("anchor must hold {n} finite values"));
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(self.cost.as_slice())
            || !finite(self.eq_matrix.as_slice())
            || !finite(self.eq_rhs.as_slice())
            || !finite(self.ineq_matrix.as_slice())
            || !finite(self.ineq_rhs.as_slice())
        {
            return bad("non-finite coefficient".into());
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return bad(format!("invalid bound pair [{l}, {u}] on variable {j}"));
            }
            if l > u {
                return bad(format!(
                    "lower bound {l} exceeds upper bound {u} on variable {j}"
                ));
            }
        }
        Ok(())
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        self.cost.dot(w)
    }

    /// Largest violation of any row or bound at `w`.
    pub fn primal_violation(&self, w: &DVector<f64>) -> f64 {
        let eq = (&self.eq_matrix * w - &self.eq_rhs).amax();
        let ineq = (&self.ineq_matrix * w + &self.ineq_rhs)
            .iter()
            .fold(0.0_f64, |acc, &r| acc.max(r));
        let bounds = (0..w.len()).fold(0.0_f64, |acc, j| {
            acc.max(self.lower[j] - w[j]).max(w[j] - self.upper[j])
        });
        if self.eq_rhs.is_empty() {
            ineq.max(bounds)
        } else {
            eq.max(ineq).max(bounds)
        }
    }
}

/// Termination status of [`solve_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Result of [`solve_lp`].
///
/// Multipliers follow the Lagrangian `c'w - lambda'(E w - e) + pi'(A w + b) - z'w`, i.e.
/// at an optimum `c - E' lambda + A' pi - z = 0` holds with `pi >= 0` and
/// `reduced_costs = z`, positive at active lower bounds and negative at active upper bounds.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: DVector<f64>,
    pub duals_eq: DVector<f64>,
    pub duals_ineq: DVector<f64>,
    pub reduced_costs: DVector<f64>,
    pub objective: f64,
    pub pivots: usize,
    /// Final basis, usable as a warm start for a problem of identical shape.
    pub basis: Option<Basis>,
}

impl LpSolution {
    /// Max-norm KKT residual of this solution for `p`: stationarity, primal feasibility, dual
    /// sign conditions and complementarity of rows and bounds.
    pub fn kkt_residual(&self, p: &LpProblem) -> f64 {
        let w = &self.primal;
        let stat = &p.cost - p.eq_matrix.transpose() * &self.duals_eq
            + p.ineq_matrix.transpose() * &self.duals_ineq
            - &self.reduced_costs;
        let mut res = stat.amax().max(p.primal_violation(w));
        let act = &p.ineq_matrix * w + &p.ineq_rhs;
        for i in 0..p.num_ineq() {
            let pi = self.duals_ineq[i];
            res = res.max(-pi).max((pi * act[i]).abs());
        }
        for j in 0..p.num_vars() {
            let z = self.reduced_costs[j];
            let comp = if z > 0.0 {
                z * (w[j] - p.lower[j])
            } else if z < 0.0 {
                -z * (p.upper[j] - w[j])
            } else {
                0.0
            };
            // An infinite bound with a nonzero multiplier is a sign violation.
            let comp = if comp.is_nan() || comp.is_infinite() {
                z.abs()
            } else {
                comp.abs()
            };
            res = res.max(comp);
        }
        res
    }
}

/// Tolerances and budgets of the simplex method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpTolerances {
    pub feas_tol: f64,
    pub dual_tol: f64,
    pub comp_tol: f64,
    /// Smallest pivot element magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    pub max_pivots: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_limit: usize,
    /// Pivots between fresh factorizations of the basis.
    pub refactor_interval: usize,
}

impl Default for LpTolerances {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            dual_tol: 1e-9,
            comp_tol: 1e-9,
            pivot_tol: 1e-9,
            max_pivots: 20_000,
            degeneracy_limit: 50,
            refactor_interval: 64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn tol() -> LpTolerances {
        LpTolerances::default()
    }

    #[test]
    fn bound_active_minimum() {
        let p = LpProblem::new(dvector![1.0]).with_bounds(dvector![0.0], dvector![1.0]);
        let sol = solve_lp(&p, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.primal[0], 0.0);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.kkt_residual(&p) <= 1e-12);
    }

    #[test]
    fn degenerate_face_is_deterministic() {
        let p = LpProblem::new(dvector![-1.0, -1.0])
            .with_inequalities(dmatrix![1.0, 1.0], dvector![-1.0])
            .with_bounds(dvector![0.0, 0.0], dvector![f64::INFINITY, f64::INFINITY]);
        let a = solve_lp(&p, &tol()).unwrap();
        let b = solve_lp(&p, &tol()).unwrap();
        assert_eq!(a.status, LpStatus::Optimal);
        assert!((a.objective + 1.0).abs() <= 1e-12);
        assert_eq!(a.primal, b.primal);
        // the reported point is a vertex of the optimal face
        let on_vertex = |w: &DVector<f64>| {
            (w[0].abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12)
                || (w[1].abs() < 1e-12 && (w[0] - 1.0).abs() < 1e-12)
        };
        assert!(on_vertex(&a.primal), "{}", a.primal);
        assert!(a.kkt_residual(&p) <= 1e-9);
    }

    #[test]
    fn contradictory_equality_and_bounds() {
        let p = LpProblem::new(dvector![0.0])
            .with_equalities(dmatrix![1.0], dvector![1.0])
            .with_bounds(dvector![0.0], dvector![0.0]);
        let sol = solve_lp(&p, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let p = LpProblem::new(dvector![-1.0, 0.0])
            .with_inequalities(dmatrix![-1.0, 1.0], dvector![0.0])
            .with_bounds(dvector![0.0, 0.0], dvector![f64::INFINITY, f64::INFINITY]);
        let sol = solve_lp(&p, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + 2y  s.t.  x + y = 1, x - y <= 3, y >= -5, x free
        let p = LpProblem::new(dvector![1.0, 2.0])
            .with_equalities(dmatrix![1.0, 1.0], dvector![1.0])
            .with_inequalities(dmatrix![1.0, -1.0], dvector![-3.0])
            .with_bounds(
                dvector![f64::NEG_INFINITY, -5.0],
                dvector![f64::INFINITY, f64::INFINITY],
            );
        let sol = solve_lp(&p, &tol()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 2.0).abs() < 1e-12);
        assert!((sol.primal[1] + 1.0).abs() < 1e-12);
        assert!(sol.kkt_residual(&p) <= 1e-9);
        assert!(sol.duals_ineq[0] > 0.0);
    }

    #[test]
    fn malformed_input_is_rejected() {
        let p = LpProblem::new(dvector![1.0]).with_bounds(dvector![1.0], dvector![0.0]);
        assert!(matches!(
            solve_lp(&p, &tol()),
            Err(FslpError::MalformedLp(_))
        ));
        let p = LpProblem::new(dvector![f64::NAN]);
        assert!(solve_lp(&p, &tol()).is_err());
        let p = LpProblem::new(dvector![1.0, 1.0]).with_equalities(dmatrix![1.0], dvector![1.0]);
        assert!(solve_lp(&p, &tol()).is_err());
    }

    #[test]
    fn iteration_limit_is_reported() {
        let p = LpProblem::new(dvector![-1.0, -1.0])
            .with_inequalities(dmatrix![1.0, 2.0; 2.0, 1.0], dvector![-4.0, -4.0])
            .with_bounds(dvector![0.0, 0.0], dvector![10.0, 10.0]);
        let t = LpTolerances {
            max_pivots: 1,
            ..tol()
        };
        let sol = solve_lp(&p, &t).unwrap();
        assert_eq!(sol.status, LpStatus::IterationLimit);
    }

    #[test]
    fn warm_start_after_rhs_change() {
        let mk = |r: f64| {
            LpProblem::new(dvector![-1.0, -2.0])
                .with_equalities(dmatrix![1.0, -1.0], dvector![r])
                .with_inequalities(dmatrix![1.0, 1.0], dvector![-4.0])
                .with_bounds(dvector![0.0, 0.0], dvector![3.0, 3.0])
        };
        let first = solve_lp(&mk(0.0), &tol()).unwrap();
        let p2 = mk(0.1);
        let warm = solve_lp_warm(&p2, &tol(), first.basis.as_ref()).unwrap();
        let cold = solve_lp(&p2, &tol()).unwrap();
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-12);
        assert!(warm.pivots <= cold.pivots);
    }
}
