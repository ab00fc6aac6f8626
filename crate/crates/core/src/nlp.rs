//! Nonlinear programs with a linear objective, linear inequalities and nonlinear equalities:
//!
//! ```text
//!     minimize     c' w
//!     subject to   C w + g(P_y w) = 0
//!                  A w + b <= 0
//! ```
//!
//! The decision vector `w = (y, s)` splits into non-slack variables `y`, which enter the
//! nonlinear map `g`, and slack variables `s = (s_ocp, s_nlp)`, which enter only linearly.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{FslpError, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, LpTolerances};

/// Nonlinear part `g: R^{n_y} -> R^{n_g}` of the equality constraints.
///
/// Implementations must be reentrant; a problem may be evaluated from several threads.
pub trait ConstraintMap: Send + Sync {
    fn num_inputs(&self) -> usize;

    fn num_outputs(&self) -> usize;

    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>>;

    /// Jacobian `dg/dy` as an `n_g x n_y` matrix (the transpose of `∇g`).
    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// [`ConstraintMap`] backed by a pair of closures.
pub struct FnConstraints<G, J> {
    inputs: usize,
    outputs: usize,
    g: G,
    jac: J,
}

impl<G, J> FnConstraints<G, J>
where
    G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
    J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    pub fn new(inputs: usize, outputs: usize, g: G, jac: J) -> Self {
        Self {
            inputs,
            outputs,
            g,
            jac,
        }
    }
}

impl<G, J> ConstraintMap for FnConstraints<G, J>
where
    G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
    J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync,
{
    fn num_inputs(&self) -> usize {
        self.inputs
    }

    fn num_outputs(&self) -> usize {
        self.outputs
    }

    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.g)(y))
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok((self.jac)(y))
    }
}

/// Split of the decision vector into non-slack, penalized slack and reformulation slack parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariablePartition {
    n_w: usize,
    y_indices: Vec<usize>,
    s_ocp_indices: Vec<usize>,
    s_nlp_indices: Vec<usize>,
    /// Indices of slack variables (both kinds), ascending.
    slack_indices: Vec<usize>,
    /// Position of each variable within `y`, if it is a non-slack variable.
    y_position: Vec<Option<usize>>,
}

impl VariablePartition {
    pub fn new(
        n_w: usize,
        y_indices: Vec<usize>,
        s_ocp_indices: Vec<usize>,
        s_nlp_indices: Vec<usize>,
    ) -> Result<Self> {
        let mut owner = vec![0u8; n_w];
        for &i in y_indices.iter().chain(&s_ocp_indices).chain(&s_nlp_indices) {
            if i >= n_w {
                return Err(FslpError::Config(format!(
                    "partition index {i} out of range {n_w}"
                )));
            }
            owner[i] += 1;
        }
        if let Some(i) = owner.iter().position(|&c| c != 1) {
            return Err(FslpError::Config(format!(
                "variable {i} appears {} times in the partition",
                owner[i]
            )));
        }
        let mut y_position = vec![None; n_w];
        for (k, &i) in y_indices.iter().enumerate() {
            y_position[i] = Some(k);
        }
        let mut slack_indices: Vec<usize> = s_ocp_indices
            .iter()
            .chain(&s_nlp_indices)
            .copied()
            .collect();
        slack_indices.sort_unstable();
        Ok(Self {
            n_w,
            y_indices,
            s_ocp_indices,
            s_nlp_indices,
            slack_indices,
            y_position,
        })
    }

    /// All variables are non-slack.
    pub fn all_y(n_w: usize) -> Self {
        Self::new(n_w, (0..n_w).collect(), vec![], vec![]).expect("trivial partition")
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn n_y(&self) -> usize {
        self.y_indices.len()
    }

    pub fn y_indices(&self) -> &[usize] {
        &self.y_indices
    }

    pub fn s_ocp_indices(&self) -> &[usize] {
        &self.s_ocp_indices
    }

    pub fn s_nlp_indices(&self) -> &[usize] {
        &self.s_nlp_indices
    }

    pub fn slack_indices(&self) -> &[usize] {
        &self.slack_indices
    }

    pub fn is_y(&self, i: usize) -> bool {
        self.y_position[i].is_some()
    }

    /// `P_y w`.
    pub fn select_y(&self, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_y(), self.y_indices.iter().map(|&i| w[i]))
    }

    /// `‖P_y v‖_∞`.
    pub fn y_max_norm(&self, v: &DVector<f64>) -> f64 {
        self.y_indices
            .iter()
            .fold(0.0_f64, |acc, &i| acc.max(v[i].abs()))
    }

    /// `‖s_ocp‖_∞`, zero when there are no penalized slacks.
    pub fn ocp_slack_norm(&self, w: &DVector<f64>) -> f64 {
        self.s_ocp_indices
            .iter()
            .fold(0.0_f64, |acc, &i| acc.max(w[i].abs()))
    }
}

/// Bounds implied by inequality rows with a single nonzero entry.
#[derive(Debug, Clone)]
pub(crate) struct BoxRows {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_row: Vec<Option<usize>>,
    pub upper_row: Vec<Option<usize>>,
    /// Rows that are not simple bounds.
    pub general_rows: Vec<usize>,
}

impl BoxRows {
    fn analyze(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        let (rows, n) = a.shape();
        let mut lower = vec![f64::NEG_INFINITY; n];
        let mut upper = vec![f64::INFINITY; n];
        let mut lower_row = vec![None; n];
        let mut upper_row = vec![None; n];
        let mut general_rows = Vec::new();
        for r in 0..rows {
            let mut single = None;
            let mut count = 0;
            for j in 0..n {
                if a[(r, j)] != 0.0 {
                    count += 1;
                    single = Some(j);
                }
            }
            match (count, single) {
                (1, Some(j)) => {
                    let coef = a[(r, j)];
                    let bound = -b[r] / coef;
                    if coef > 0.0 {
                        if bound < upper[j] {
                            upper[j] = bound;
                            upper_row[j] = Some(r);
                        }
                    } else if bound > lower[j] {
                        lower[j] = bound;
                        lower_row[j] = Some(r);
                    }
                }
                _ => general_rows.push(r),
            }
        }
        Self {
            lower,
            upper,
            lower_row,
            upper_row,
            general_rows,
        }
    }
}

/// The canonical nonlinear program.
pub struct NlpProblem {
    pub cost: DVector<f64>,
    /// `C`, `n_g x n_w`.
    pub eq_linear: DMatrix<f64>,
    /// `A`, `n_b x n_w`.
    pub ineq_matrix: DMatrix<f64>,
    /// `b`.
    pub ineq_rhs: DVector<f64>,
    pub partition: VariablePartition,
    constraints: Arc<dyn ConstraintMap>,
    pub(crate) boxes: BoxRows,
    g_evals: AtomicUsize,
    jacobian_evals: AtomicUsize,
}

impl std::fmt::Debug for NlpProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NlpProblem")
            .field("n_w", &self.num_vars())
            .field("n_g", &self.num_eq())
            .field("n_b", &self.num_ineq())
            .field("n_y", &self.partition.n_y())
            .finish()
    }
}

impl NlpProblem {
    pub fn new(
        cost: DVector<f64>,
        eq_linear: DMatrix<f64>,
        ineq_matrix: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
        constraints: Arc<dyn ConstraintMap>,
        partition: VariablePartition,
    ) -> Result<Self> {
        let n_w = cost.len();
        let dim = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(FslpError::Dimension {
                    what,
                    expected,
                    got,
                })
            }
        };
        dim("partition size", n_w, partition.n_w())?;
        dim(
            "constraint map inputs",
            partition.n_y(),
            constraints.num_inputs(),
        )?;
        dim(
            "linear equality rows",
            constraints.num_outputs(),
            eq_linear.nrows(),
        )?;
        dim("linear equality columns", n_w, eq_linear.ncols())?;
        dim("inequality columns", n_w, ineq_matrix.ncols())?;
        dim("inequality rhs", ineq_matrix.nrows(), ineq_rhs.len())?;
        let boxes = BoxRows::analyze(&ineq_matrix, &ineq_rhs);
        Ok(Self {
            cost,
            eq_linear,
            ineq_matrix,
            ineq_rhs,
            partition,
            constraints,
            boxes,
            g_evals: AtomicUsize::new(0),
            jacobian_evals: AtomicUsize::new(0),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    /// `n_g`.
    pub fn num_eq(&self) -> usize {
        self.eq_linear.nrows()
    }

    /// `n_b`.
    pub fn num_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    pub fn constraint_map(&self) -> &dyn ConstraintMap {
        self.constraints.as_ref()
    }

    /// Number of evaluations of `g` performed through this problem so far.
    pub fn constraint_evaluations(&self) -> usize {
        self.g_evals.load(Ordering::Relaxed)
    }

    pub fn jacobian_evaluations(&self) -> usize {
        self.jacobian_evals.load(Ordering::Relaxed)
    }

    fn check_len(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.num_vars() {
            return Err(FslpError::Dimension {
                what: "decision vector",
                expected: self.num_vars(),
                got: w.len(),
            });
        }
        Ok(())
    }

    /// `g(P_y w)`, counted and checked for non-finite entries.
    pub fn eval_g(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(w)?;
        self.g_evals.fetch_add(1, Ordering::Relaxed);
        let g = self.constraints.eval(&self.partition.select_y(w))?;
        if g.len() != self.num_eq() {
            return Err(FslpError::Dimension {
                what: "constraint map output",
                expected: self.num_eq(),
                got: g.len(),
            });
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(FslpError::Evaluation(format!("g[{i}] = {}", g[i])));
        }
        Ok(g)
    }

    /// `dg/dy` at `P_y w`.
    pub fn eval_jacobian(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(w)?;
        self.jacobian_evals.fetch_add(1, Ordering::Relaxed);
        let jac = self.constraints.jacobian(&self.partition.select_y(w))?;
        if jac.shape() != (self.num_eq(), self.partition.n_y()) {
            return Err(FslpError::Evaluation(format!(
                "jacobian has shape {:?}, expected {:?}",
                jac.shape(),
                (self.num_eq(), self.partition.n_y())
            )));
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(FslpError::Evaluation("non-finite jacobian entry".into()));
        }
        Ok(jac)
    }

    /// `C w + g(P_y w)` given a precomputed `g`.
    pub fn eq_residual_with(&self, w: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        &self.eq_linear * w + g
    }

    /// `A w + b`.
    pub fn ineq_residual(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.ineq_matrix * w + &self.ineq_rhs
    }

    /// Infeasibility `‖C w + g‖_∞ + ‖[A w + b]^+‖_∞` given a precomputed `g = g(P_y w)`.
    pub fn infeasibility_with(&self, w: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let eq = self
            .eq_residual_with(w, g)
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        let ineq = self.ineq_residual(w).iter().fold(0.0_f64, |a, &v| a.max(v));
        eq + ineq
    }

    /// `h(w) = ‖C w + g(P_y w)‖_∞ + ‖[A w + b]^+‖_∞`.
    pub fn infeasibility(&self, w: &DVector<f64>) -> Result<f64> {
        let g = self.eval_g(w)?;
        Ok(self.infeasibility_with(w, &g))
    }

    /// Linearization of the equality constraints at `base` with the Jacobian embedded into
    /// the full variable space.
    pub fn linearize(&self, base: &DVector<f64>) -> Result<Linearization> {
        let g = self.eval_g(base)?;
        let jac = self.eval_jacobian(base)?;
        Ok(Linearization {
            base_point: base.clone(),
            fixed_jacobian: self.embed_jacobian(&jac),
            g_at_base: g,
        })
    }

    /// `J P_y`: scatters the `n_y` columns of `J` onto the non-slack positions.
    pub fn embed_jacobian(&self, jac: &DMatrix<f64>) -> DMatrix<f64> {
        let mut full = DMatrix::zeros(self.num_eq(), self.num_vars());
        for (k, &i) in self.partition.y_indices().iter().enumerate() {
            full.set_column(i, &jac.column(k));
        }
        full
    }

    /// Max-norm KKT residual of `(w, lambda, pi)` for the Lagrangian
    /// `c'w + lambda'(C w + g(P_y w)) + pi'(A w + b)`.
    pub fn kkt_residual(
        &self,
        w: &DVector<f64>,
        lambda: &DVector<f64>,
        pi: &DVector<f64>,
    ) -> Result<f64> {
        let g = self.eval_g(w)?;
        let jac = self.embed_jacobian(&self.eval_jacobian(w)?);
        let grad = &self.cost
            + self.eq_linear.tr_mul(lambda)
            + jac.tr_mul(lambda)
            + self.ineq_matrix.tr_mul(pi);
        let eq = self.eq_residual_with(w, &g);
        let ineq = self.ineq_residual(w);
        let mut res = grad.amax().max(if eq.is_empty() { 0.0 } else { eq.amax() });
        for i in 0..self.num_ineq() {
            res = res.max(ineq[i]).max(-pi[i]).max((pi[i] * ineq[i]).abs());
        }
        Ok(res)
    }

    /// Slack values minimizing `c_s's` subject to all constraints with the non-slack
    /// variables fixed to `y`.
    pub fn minimal_slack(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let part = &self.partition;
        if y.len() != part.n_y() {
            return Err(FslpError::Dimension {
                what: "non-slack vector",
                expected: part.n_y(),
                got: y.len(),
            });
        }
        let slacks = part.slack_indices();
        let mut w = DVector::zeros(self.num_vars());
        for (k, &i) in part.y_indices().iter().enumerate() {
            w[i] = y[k];
        }
        if slacks.is_empty() {
            let h = self.infeasibility(&w)?;
            if h > 1e-9 {
                return Err(FslpError::NoFeasibleSlack(format!(
                    "no slack variables and h = {h:e}"
                )));
            }
            return Ok(DVector::zeros(0));
        }
        // with s = 0 the residuals hold the y-dependent part
        let g = self.eval_g(&w)?;
        let eq_fixed = self.eq_residual_with(&w, &g);
        let ineq_fixed = self.ineq_residual(&w);
        let pick = |m: &DMatrix<f64>| m.select_columns(slacks.iter());
        let lp = LpProblem::new(DVector::from_iterator(
            slacks.len(),
            slacks.iter().map(|&i| self.cost[i]),
        ))
        .with_equalities(pick(&self.eq_linear), -eq_fixed)
        .with_inequalities(pick(&self.ineq_matrix), ineq_fixed);
        let sol = solve_lp(&lp, &LpTolerances::default())?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.primal),
            other => Err(FslpError::NoFeasibleSlack(format!(
                "slack LP status {other:?}"
            ))),
        }
    }

    /// Builds `w` from `y` and the minimal slacks for `y`.
    pub fn with_minimal_slack(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.minimal_slack(y)?;
        let mut w = DVector::zeros(self.num_vars());
        for (k, &i) in self.partition.y_indices().iter().enumerate() {
            w[i] = y[k];
        }
        for (k, &i) in self.partition.slack_indices().iter().enumerate() {
            w[i] = s[k];
        }
        Ok(w)
    }

    /// Numerical rank of `A`. Logs a warning when `A` lacks full row rank.
    pub fn check_ineq_rank(&self) -> usize {
        let svd = self.ineq_matrix.clone().svd(false, false);
        let smax = svd.singular_values.iter().fold(0.0_f64, |a, &v| a.max(v));
        let tol = smax * 1e-10 * self.num_vars().max(self.num_ineq()) as f64;
        let rank = svd.singular_values.iter().filter(|&&v| v > tol).count();
        if rank < self.num_ineq() {
            warn!(
                "inequality matrix has rank {rank} < {} rows",
                self.num_ineq()
            );
        }
        rank
    }

    /// Largest deviation between the analytic Jacobian and central differences of `g` at `y`.
    ///
    /// Validation utility only: the solver never differentiates numerically.
    pub fn jacobian_error(&self, y: &DVector<f64>, step: f64) -> Result<f64> {
        let map = self.constraint_map();
        let analytic = map.jacobian(y)?;
        let mut worst = 0.0_f64;
        let mut yp = y.clone();
        for k in 0..y.len() {
            let orig = yp[k];
            yp[k] = orig + step;
            let gp = map.eval(&yp)?;
            yp[k] = orig - step;
            let gm = map.eval(&yp)?;
            yp[k] = orig;
            for i in 0..gp.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                worst = worst.max((fd - analytic[(i, k)]).abs());
            }
        }
        Ok(worst)
    }
}

/// First-order model of the equality constraints at a base point.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub base_point: DVector<f64>,
    /// `∇g(P_y ŵ)' P_y`, `n_g x n_w`.
    pub fixed_jacobian: DMatrix<f64>,
    pub g_at_base: DVector<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    /// `min w2  s.t.  w1^2 - w2 + s = 0, 0.1 w1 + eps - w2 <= 0, s >= 0`, `w = (w1, w2, s)`.
    fn parabola(eps: f64) -> NlpProblem {
        let g = FnConstraints::new(
            2,
            1,
            |y: &DVector<f64>| dvector![y[0] * y[0]],
            |y: &DVector<f64>| dmatrix![2.0 * y[0], 0.0],
        );
        NlpProblem::new(
            dvector![0.0, 1.0, 0.0],
            dmatrix![0.0, -1.0, 1.0],
            dmatrix![0.1, -1.0, 0.0; 0.0, 0.0, -1.0],
            dvector![eps, 0.0],
            Arc::new(g),
            VariablePartition::new(3, vec![0, 1], vec![], vec![2]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn infeasibility_hand_values() {
        let p = parabola(0.06);
        let h = p.infeasibility(&dvector![1.0, 0.0, 0.0]).unwrap();
        assert!((h - 1.16).abs() < 1e-12, "{h}");
        let h = p.infeasibility(&dvector![2.0, 10.0, 6.0]).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn nan_residual_is_an_error() {
        let p = parabola(0.06);
        assert!(matches!(
            p.infeasibility(&dvector![f64::NAN, 0.0, 0.0]),
            Err(FslpError::Evaluation(_))
        ));
    }

    #[test]
    fn minimal_slack_is_pinned_by_equality() {
        let p = parabola(0.06);
        let s = p.minimal_slack(&dvector![2.0, 10.0]).unwrap();
        assert!((s[0] - 6.0).abs() < 1e-12);
        let s = parabola(-0.06).minimal_slack(&dvector![0.0, 0.0]).unwrap();
        assert!(s[0].abs() < 1e-12);
        // 0.1 w1 - w2 + eps <= 0 fails at the origin whatever the slack
        assert!(p.minimal_slack(&dvector![0.0, 0.0]).is_err());
        // w2 < w1^2 would need a negative slack
        assert!(matches!(
            p.minimal_slack(&dvector![1.0, 0.5]),
            Err(FslpError::NoFeasibleSlack(_))
        ));
    }

    #[test]
    fn linearize_embeds_jacobian() {
        let p = parabola(0.06);
        let lin = p.linearize(&dvector![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(lin.fixed_jacobian, dmatrix![2.0, 0.0, 0.0]);
        assert_eq!(lin.g_at_base, dvector![1.0]);
    }

    #[test]
    fn linearize_linear_map() {
        let m = dmatrix![1.0, 2.0; -3.0, 0.5];
        let d = dvector![0.25, -1.0];
        let (m2, d2) = (m.clone(), d.clone());
        let g = FnConstraints::new(
            2,
            2,
            move |y: &DVector<f64>| &m2 * y + &d2,
            move |_: &DVector<f64>| m.clone(),
        );
        let p = NlpProblem::new(
            DVector::zeros(3),
            DMatrix::zeros(2, 3),
            DMatrix::zeros(0, 3),
            DVector::zeros(0),
            Arc::new(g),
            VariablePartition::new(3, vec![0, 2], vec![1], vec![]).unwrap(),
        )
        .unwrap();
        let lin = p.linearize(&dvector![1.0, 5.0, -2.0]).unwrap();
        assert_eq!(lin.fixed_jacobian, dmatrix![1.0, 0.0, 2.0; -3.0, 0.0, 0.5]);
    }

    #[test]
    fn kkt_residual_detects_dual_perturbation() {
        let p = parabola(0.06);
        // optimum (-0.2, 0.04, 0): both constraints active
        let w = dvector![-0.2, 0.04, 0.0];
        // stationarity: (0,1,0) + lambda (2 w1, -1, 1) + pi1 (0.1, -1, 0) + pi2 (0, 0, -1) = 0
        // => lambda (-0.4) + 0.1 pi1 = 0, 1 - lambda - pi1 = 0, lambda - pi2 = 0
        let lambda = 0.2;
        let pi1 = 0.8;
        let exact = p
            .kkt_residual(&w, &dvector![lambda], &dvector![pi1, lambda])
            .unwrap();
        assert!(exact < 1e-12, "{exact}");
        let off = p
            .kkt_residual(&w, &dvector![lambda + 1.0], &dvector![pi1, lambda])
            .unwrap();
        assert!(off > 0.1);
    }

    #[test]
    fn partition_must_cover_variables() {
        assert!(VariablePartition::new(3, vec![0, 1], vec![], vec![]).is_err());
        assert!(VariablePartition::new(2, vec![0, 1], vec![1], vec![]).is_err());
        assert!(VariablePartition::new(2, vec![0, 5], vec![], vec![1]).is_err());
    }

    #[test]
    fn box_rows_become_bounds() {
        let p = parabola(0.06);
        assert_eq!(p.boxes.general_rows, vec![0]);
        assert_eq!(p.boxes.lower[2], 0.0);
        assert_eq!(p.boxes.lower_row[2], Some(1));
        assert!(p.boxes.upper[2].is_infinite());
    }
}
