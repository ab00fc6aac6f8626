//! Bounded-variable revised primal simplex with an explicit dense basis inverse.
//!
//! Internal column layout: `0..n` structural variables, `n..n+mi` inequality slacks
//! (`A_i w + t_i = -b_i`, `t_i >= 0`), then one artificial column per row used by phase one.
//! Nonbasic variables rest at a bound or, if the problem carries an anchor, at their anchor
//! value; in the latter case they may enter in either direction.
//! Pricing is Dantzig's rule with lowest-index tie breaking; after a run of degenerate pivots
//! the method switches to Bland's rule until progress resumes. The ratio test is the two-pass
//! Harris test.

#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use log::trace;
use nalgebra::{DMatrix, DVector};

use super::{LpProblem, LpSolution, LpStatus, LpTolerances};
use crate::error::Result;

/// A simplex basis, reusable as a warm start for a problem with the same row and column
/// counts (typically the same matrix with a different right-hand side).
#[derive(Debug, Clone)]
pub struct Basis {
    shape: (usize, usize, usize),
    basic: Vec<usize>,
    state: Vec<Rest>,
    /// Basis inverse with the columns it was computed from; reused when the new problem
    /// has the same basic columns.
    factor: Option<Arc<Factor>>,
}

#[derive(Debug)]
struct Factor {
    columns: Vec<Vec<(usize, f64)>>,
    binv: DMatrix<f64>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.basic == other.basic && self.state == other.state
    }
}

impl Basis {
    /// Internal column indices of the basic variables, one per row.
    pub fn basic_columns(&self) -> &[usize] {
        &self.basic
    }
}

/// Solves `p` from a cold start.
pub fn solve_lp(p: &LpProblem, tol: &LpTolerances) -> Result<LpSolution> {
    solve_lp_warm(p, tol, None)
}

/// Solves `p`, starting from `warm` when it is a usable basis of `p`.
///
/// A primal-feasible warm basis continues with the primal simplex. Otherwise, if the basis is
/// dual feasible (possibly after moving boxed nonbasic variables to their other bound), the
/// dual simplex restores primal feasibility first; this keeps the solution on the same face
/// when only the right-hand side moved. Any other warm basis falls back to a cold start.
pub fn solve_lp_warm(
    p: &LpProblem,
    tol: &LpTolerances,
    warm: Option<&Basis>,
) -> Result<LpSolution> {
    p.validate()?;
    let mut s = Simplex::new(p, *tol);

    let warm_ok = match warm {
        Some(b) if s.install_warm_basis(b) => {
            s.set_phase_two_costs();
            s.is_primal_feasible()
                || (s.make_dual_feasible() && matches!(s.dual_iterate(), Outcome::Optimal))
        }
        _ => false,
    };
    if !warm_ok {
        s.install_cold_basis();
        s.set_phase_one_costs();
        // with every artificial already at zero, phase-one pivots would only be degenerate
        // moves away from the resting values
        if s.artificial_infeasibility() > 0.0 {
            match s.iterate() {
                Outcome::Optimal => {}
                Outcome::IterationLimit => return Ok(s.finish(LpStatus::IterationLimit)),
                // phase one is bounded below by zero
                Outcome::Unbounded => return Ok(s.finish(LpStatus::IterationLimit)),
            }
        }
        if s.artificial_infeasibility() > s.phase_one_threshold() {
            return Ok(s.finish(LpStatus::Infeasible));
        }
        s.fix_artificials();
        s.drive_out_artificials();
    }

    s.set_phase_two_costs();
    let status = match s.iterate() {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::IterationLimit => LpStatus::IterationLimit,
    };
    Ok(s.finish(status))
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

enum Step {
    Flip,
    Pivot { row: usize, to_upper: bool },
    Unbounded,
}

const NONBASIC: usize = usize::MAX;

/// Product-form updates tolerated before the final solution is recomputed from a fresh
/// factorization.
const FINAL_REFACTOR_AFTER: usize = 16;

/// Where a nonbasic variable rests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rest {
    Lower,
    Upper,
    Anchor,
}

struct Simplex<'a> {
    p: &'a LpProblem,
    tol: LpTolerances,
    n: usize,
    me: usize,
    mi: usize,
    m: usize,
    /// Sparse structural columns as (row, value).
    cols: Vec<Vec<(usize, f64)>>,
    art_sign: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    anchor: Vec<f64>,
    state: Vec<Rest>,
    basic: Vec<usize>,
    pos: Vec<usize>,
    binv: DMatrix<f64>,
    pivots: usize,
    since_refactor: usize,
    degenerate_run: usize,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem, tol: LpTolerances) -> Self {
        let n = p.num_vars();
        let me = p.num_eq();
        let mi = p.num_ineq();
        let m = me + mi;
        let total = n + mi + m;

        let mut cols = vec![Vec::new(); n];
        for (j, col) in cols.iter_mut().enumerate() {
            for i in 0..me {
                let v = p.eq_matrix[(i, j)];
                if v != 0.0 {
                    col.push((i, v));
                }
            }
            for i in 0..mi {
                let v = p.ineq_matrix[(i, j)];
                if v != 0.0 {
                    col.push((me + i, v));
                }
            }
        }

        let mut rhs = Vec::with_capacity(m);
        rhs.extend(p.eq_rhs.iter().copied());
        rhs.extend(p.ineq_rhs.iter().map(|b| -b));

        let mut lower = vec![0.0; total];
        let mut upper = vec![f64::INFINITY; total];
        lower[..n].copy_from_slice(p.lower.as_slice());
        upper[..n].copy_from_slice(p.upper.as_slice());
        let mut anchor = vec![f64::NAN; total];
        if let Some(a) = &p.anchor {
            for j in 0..n {
                anchor[j] = a[j].clamp(lower[j], upper[j]);
            }
        }

        Self {
            p,
            tol,
            n,
            me,
            mi,
            m,
            cols,
            art_sign: vec![1.0; m],
            rhs,
            lower,
            upper,
            cost: vec![0.0; total],
            x: vec![0.0; total],
            anchor,
            state: vec![Rest::Lower; total],
            basic: vec![NONBASIC; m],
            pos: vec![NONBASIC; total],
            binv: DMatrix::identity(m, m),
            pivots: 0,
            since_refactor: 0,
            degenerate_run: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + self.mi + self.m
    }

    /// Calls `f(row, value)` for every nonzero of internal column `j`.
    #[inline]
    fn for_each_entry(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, v) in &self.cols[j] {
                f(i, v);
            }
        } else if j < self.n + self.mi {
            f(self.me + (j - self.n), 1.0);
        } else {
            let i = j - self.n - self.mi;
            f(i, self.art_sign[i]);
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        let (l, u) = (self.lower[j], self.upper[j]);
        if self.state[j] == Rest::Anchor && !self.anchor[j].is_nan() {
            self.anchor[j].clamp(l, u)
        } else if self.state[j] == Rest::Upper && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    fn install_cold_basis(&mut self) {
        let (n, mi, m) = (self.n, self.mi, self.m);
        for j in 0..self.total() {
            self.pos[j] = NONBASIC;
            self.state[j] = if !self.anchor[j].is_nan() {
                Rest::Anchor
            } else if !self.lower[j].is_finite() && self.upper[j].is_finite() {
                Rest::Upper
            } else {
                Rest::Lower
            };
        }
        for j in 0..n {
            self.x[j] = self.nonbasic_value(j);
        }
        let mut resid = self.rhs.clone();
        for j in 0..n {
            let xj = self.x[j];
            if xj != 0.0 {
                for &(i, v) in &self.cols[j] {
                    resid[i] -= v * xj;
                }
            }
        }
        self.binv = DMatrix::zeros(m, m);
        for i in 0..m {
            let art = n + mi + i;
            self.lower[art] = 0.0;
            self.upper[art] = f64::INFINITY;
            let r = resid[i];
            if i >= self.me && r >= 0.0 {
                let slack = n + (i - self.me);
                self.basic[i] = slack;
                self.pos[slack] = i;
                self.x[slack] = r;
                self.x[art] = 0.0;
                self.art_sign[i] = 1.0;
                self.binv[(i, i)] = 1.0;
            } else {
                if i >= self.me {
                    let slack = n + (i - self.me);
                    self.x[slack] = 0.0;
                }
                let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                self.art_sign[i] = sign;
                self.basic[i] = art;
                self.pos[art] = i;
                self.x[art] = r.abs();
                self.binv[(i, i)] = sign;
            }
        }
        self.since_refactor = 0;
    }

    fn install_warm_basis(&mut self, b: &Basis) -> bool {
        if b.shape != (self.n, self.me, self.mi)
            || b.basic.len() != self.m
            || b.state.len() != self.total()
        {
            return false;
        }
        for i in 0..self.m {
            let art = self.n + self.mi + i;
            self.lower[art] = 0.0;
            self.upper[art] = 0.0;
            self.art_sign[i] = 1.0;
        }
        self.pos.iter_mut().for_each(|p| *p = NONBASIC);
        for (i, &j) in b.basic.iter().enumerate() {
            if j >= self.total() || self.pos[j] != NONBASIC {
                return false;
            }
            self.basic[i] = j;
            self.pos[j] = i;
        }
        self.state.copy_from_slice(&b.state);
        for j in 0..self.total() {
            if self.state[j] == Rest::Anchor && self.anchor[j].is_nan() {
                self.state[j] = Rest::Lower;
            }
            if self.pos[j] == NONBASIC {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        if let Some(f) = &b.factor {
            if f.columns == self.basic_columns_entries() {
                self.binv = f.binv.clone();
                self.since_refactor = 0;
                self.recompute_basic_values();
                return true;
            }
        }
        self.refactor()
    }

    fn basic_columns_entries(&self) -> Vec<Vec<(usize, f64)>> {
        self.basic
            .iter()
            .map(|&j| {
                let mut col = Vec::new();
                self.for_each_entry(j, |i, v| col.push((i, v)));
                col
            })
            .collect()
    }

    /// `max_i |(B x_B + N x_N - rhs)_i|` relative to the right-hand side scale.
    fn residual_is_small(&self) -> bool {
        let mut resid = self.rhs.clone();
        for j in 0..self.total() {
            let xj = self.x[j];
            if xj != 0.0 {
                self.for_each_entry(j, |i, v| resid[i] -= v * xj);
            }
        }
        let scale = self.rhs.iter().fold(1.0_f64, |acc, &v| acc.max(v.abs()));
        resid
            .iter()
            .all(|r| r.abs() <= 1e-2 * self.tol.feas_tol * scale)
    }

    fn is_primal_feasible(&self) -> bool {
        let slack = self.tol.feas_tol;
        self.basic
            .iter()
            .all(|&j| self.x[j] >= self.lower[j] - slack && self.x[j] <= self.upper[j] + slack)
    }

    /// Moves boxed nonbasic variables with wrong-signed reduced costs to their other bound.
    /// Returns false if some other nonbasic variable is dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        let dtol = self.tol.dual_tol;
        let y = self.btran();
        let mut moved = false;
        for j in 0..self.total() {
            let (l, u) = (self.lower[j], self.upper[j]);
            if self.pos[j] != NONBASIC || l == u {
                continue;
            }
            let d = self.reduced_cost(&y, j);
            if d < -dtol && self.x[j] < u {
                if !u.is_finite() {
                    return false;
                }
                self.state[j] = Rest::Upper;
                self.x[j] = u;
                moved = true;
            } else if d > dtol && self.x[j] > l {
                if !l.is_finite() {
                    return false;
                }
                self.state[j] = Rest::Lower;
                self.x[j] = l;
                moved = true;
            }
        }
        if moved {
            self.recompute_basic_values();
        }
        true
    }

    /// Dual simplex from a dual-feasible basis. `Optimal` means primal feasibility was
    /// reached; `Unbounded` means the dual is unbounded, i.e. no primal solution exists.
    ///
    /// After a run of dual-degenerate pivots the leaving row is the infeasible basic variable
    /// of lowest index and ties in the ratio test go to the lowest column index (Bland's rule
    /// for the dual). The phase stops after half the pivot budget so that a cold start keeps
    /// the other half.
    fn dual_iterate(&mut self) -> Outcome {
        let (ftol, dtol, ptol) = (self.tol.feas_tol, self.tol.dual_tol, self.tol.pivot_tol);
        self.degenerate_run = 0;
        loop {
            if self.pivots >= self.tol.max_pivots / 2 {
                return Outcome::IterationLimit;
            }
            let bland = self.degenerate_run >= self.tol.degeneracy_limit;
            if self.since_refactor >= self.tol.refactor_interval && !self.refactor() {
                trace!("basis refactorization failed, continuing with updated inverse");
            }

            let mut leave: Option<(usize, f64, bool)> = None;
            for i in 0..self.m {
                let j = self.basic[i];
                let (below, viol) = if self.x[j] < self.lower[j] - ftol {
                    (true, self.lower[j] - self.x[j])
                } else if self.x[j] > self.upper[j] + ftol {
                    (false, self.x[j] - self.upper[j])
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((li, v, _)) if bland => {
                        j < self.basic[li] || (j == self.basic[li] && viol > v)
                    }
                    Some((_, v, _)) => viol > v,
                };
                if better {
                    leave = Some((i, viol, below));
                }
            }
            let Some((r, _, below)) = leave else {
                return Outcome::Optimal;
            };

            let rho: Vec<f64> = (0..self.m).map(|k| self.binv[(r, k)]).collect();
            let y = self.btran();
            // (column, row entry, |reduced cost|)
            let mut candidates = Vec::new();
            for j in 0..self.total() {
                let (l, u) = (self.lower[j], self.upper[j]);
                if self.pos[j] != NONBASIC || l == u {
                    continue;
                }
                let mut a = 0.0;
                self.for_each_entry(j, |i, v| a += rho[i] * v);
                if a.abs() <= ptol {
                    continue;
                }
                let (up, down) = (self.x[j] < u, self.x[j] > l);
                // the leaving variable moves by -t * a when x_j moves by t
                let eligible = if below {
                    (up && a < 0.0) || (down && a > 0.0)
                } else {
                    (up && a > 0.0) || (down && a < 0.0)
                };
                if eligible {
                    let d = self.reduced_cost(&y, j).abs();
                    candidates.push((j, a, d));
                }
            }
            let entering = if bland {
                let ratio = candidates
                    .iter()
                    .map(|&(_, a, d)| d / a.abs())
                    .fold(f64::INFINITY, f64::min);
                candidates
                    .iter()
                    .find(|&&(_, a, d)| d / a.abs() <= ratio)
                    .map(|&(j, _, d)| (j, d))
            } else {
                let theta_max = candidates
                    .iter()
                    .map(|&(_, a, d)| (d + dtol) / a.abs())
                    .fold(f64::INFINITY, f64::min);
                let mut best: Option<(usize, f64, f64)> = None;
                for &(j, a, d) in &candidates {
                    if d / a.abs() <= theta_max && best.is_none_or(|(_, b, _)| a.abs() > b) {
                        best = Some((j, a.abs(), d));
                    }
                }
                best.map(|(j, _, d)| (j, d))
            };
            let Some((q, d_q)) = entering else {
                return Outcome::Unbounded;
            };
            if d_q <= dtol {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }

            let alpha = self.ftran(q);
            let leaving = self.basic[r];
            let target = if below {
                self.lower[leaving]
            } else {
                self.upper[leaving]
            };
            let t = (self.x[leaving] - target) / alpha[r];
            for i in 0..self.m {
                self.x[self.basic[i]] -= t * alpha[i];
            }
            self.x[q] += t;
            self.x[leaving] = target;
            self.state[leaving] = if below { Rest::Lower } else { Rest::Upper };
            self.pos[leaving] = NONBASIC;
            self.update_inverse(r, &alpha);
            self.basic[r] = q;
            self.pos[q] = r;
            self.pivots += 1;
            self.since_refactor += 1;
        }
    }

    /// Recomputes the basis inverse and basic values from scratch. Returns false when the
    /// basis matrix is singular.
    fn refactor(&mut self) -> bool {
        let inv = match self.invert_basis() {
            Some(inv) => inv,
            None => return false,
        };
        if inv.iter().any(|v| !v.is_finite()) {
            return false;
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basic_values();
        true
    }

    /// Inverts the basis matrix. Slack and artificial columns are signed unit vectors, so only
    /// the block of structural columns restricted to the rows no unit column covers needs a
    /// dense inverse.
    fn invert_basis(&self) -> Option<DMatrix<f64>> {
        let m = self.m;
        // unit[r] = (basis position, sign) of the unit column covering row r
        let mut unit: Vec<Option<(usize, f64)>> = vec![None; m];
        let mut structural = Vec::new();
        for (k, &j) in self.basic.iter().enumerate() {
            if j < self.n {
                structural.push(k);
            } else {
                let mut entry = None;
                self.for_each_entry(j, |i, v| entry = Some((i, v)));
                let (i, v) = entry?;
                if unit[i].is_some() {
                    return None;
                }
                unit[i] = Some((k, v));
            }
        }
        let free_rows: Vec<usize> = (0..m).filter(|&i| unit[i].is_none()).collect();
        let p = structural.len();
        if free_rows.len() != p {
            return None;
        }
        let mut row_slot = vec![usize::MAX; m];
        for (a, &i) in free_rows.iter().enumerate() {
            row_slot[i] = a;
        }
        // N_R (p x p) and N_C kept sparse per column
        let mut n_r = DMatrix::zeros(p, p);
        let mut n_c: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
        for (b, &k) in structural.iter().enumerate() {
            self.for_each_entry(self.basic[k], |i, v| {
                if row_slot[i] != usize::MAX {
                    n_r[(row_slot[i], b)] = v;
                } else {
                    n_c[b].push((i, v));
                }
            });
        }
        let m_inv = if p > 0 {
            n_r.try_inverse()?
        } else {
            DMatrix::zeros(0, 0)
        };

        let mut inv = DMatrix::zeros(m, m);
        // structural positions: x_K = N_R^{-1} b_R
        for (b, &k) in structural.iter().enumerate() {
            for (a, &i) in free_rows.iter().enumerate() {
                inv[(k, i)] = m_inv[(b, a)];
            }
        }
        // unit positions: x_r = (b_r - N_{r,K} x_K) / sign
        for (b, col) in n_c.iter().enumerate() {
            for &(r, v) in col {
                let (k, sign) = unit[r].expect("covered row");
                for (a, &i) in free_rows.iter().enumerate() {
                    inv[(k, i)] -= v * m_inv[(b, a)] / sign;
                }
            }
        }
        for (r, u) in unit.iter().enumerate() {
            if let Some((k, sign)) = *u {
                inv[(k, r)] += 1.0 / sign;
            }
        }
        Some(inv)
    }

    fn recompute_basic_values(&mut self) {
        let mut resid = self.rhs.clone();
        for j in 0..self.total() {
            if self.pos[j] == NONBASIC {
                let xj = self.x[j];
                if xj != 0.0 {
                    self.for_each_entry(j, |i, v| resid[i] -= v * xj);
                }
            }
        }
        let resid = DVector::from_vec(resid);
        let xb = &self.binv * resid;
        for i in 0..self.m {
            self.x[self.basic[i]] = xb[i];
        }
    }

    fn set_phase_one_costs(&mut self) {
        let art0 = self.n + self.mi;
        for (j, c) in self.cost.iter_mut().enumerate() {
            *c = if j >= art0 { 1.0 } else { 0.0 };
        }
    }

    fn set_phase_two_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..self.n].copy_from_slice(self.p.cost.as_slice());
    }

    fn artificial_infeasibility(&self) -> f64 {
        let art0 = self.n + self.mi;
        self.x[art0..].iter().fold(0.0_f64, |acc, &v| acc.max(v))
    }

    fn phase_one_threshold(&self) -> f64 {
        let scale = self.rhs.iter().fold(1.0_f64, |acc, &v| acc.max(v.abs()));
        10.0 * self.tol.feas_tol * scale
    }

    fn fix_artificials(&mut self) {
        let art0 = self.n + self.mi;
        for j in art0..self.total() {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            self.state[j] = Rest::Lower;
            if self.pos[j] == NONBASIC {
                self.x[j] = 0.0;
            }
        }
    }

    /// Degenerate pivots replacing basic artificials by structural or slack columns. Rows
    /// where no replacement exists are linearly dependent and keep their artificial at zero.
    fn drive_out_artificials(&mut self) {
        let art0 = self.n + self.mi;
        for r in 0..self.m {
            if self.basic[r] < art0 {
                continue;
            }
            let row: Vec<f64> = (0..self.m).map(|k| self.binv[(r, k)]).collect();
            let mut candidates = Vec::new();
            for j in 0..art0 {
                if self.pos[j] != NONBASIC || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut v = 0.0;
                self.for_each_entry(j, |i, a| v += row[i] * a);
                if v.abs() > 1e-7 {
                    candidates.push((j, v.abs()));
                }
            }
            // Prefer columns with an infinite bound (slack-like) so that boxed variables stay
            // at their resting values; accept them unless their pivot is much smaller.
            let largest = candidates.iter().fold(0.0_f64, |m, c| m.max(c.1));
            let open = |j: usize| !self.lower[j].is_finite() || !self.upper[j].is_finite();
            let key = |&(j, v): &(usize, f64)| (open(j) && v >= 1e-3 * largest, v);
            let best = candidates
                .iter()
                .copied()
                .max_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite pivots"));
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                let leaving = self.basic[r];
                self.x[leaving] = 0.0;
                self.pos[leaving] = NONBASIC;
                self.state[leaving] = Rest::Lower;
                self.update_inverse(r, &alpha);
                self.basic[r] = q;
                self.pos[q] = r;
                self.since_refactor += 1;
            }
        }
        if !self.refactor() {
            // A dependent set of replacements cannot occur since each pivot element was
            // nonzero; fall back to whatever inverse we have.
            trace!("refactor after artificial removal failed");
        }
    }

    fn btran(&self) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basic.iter().map(|&j| self.cost[j]).collect();
        let mut y = vec![0.0; m];
        for (k, yk) in y.iter_mut().enumerate() {
            let col = self.binv.column(k);
            let mut s = 0.0;
            for i in 0..m {
                s += cb[i] * col[i];
            }
            *yk = s;
        }
        y
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_each_entry(j, |r, v| {
            let col = self.binv.column(r);
            for i in 0..m {
                alpha[i] += v * col[i];
            }
        });
        alpha
    }

    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        let mut d = self.cost[j];
        self.for_each_entry(j, |i, v| d -= y[i] * v);
        d
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let dtol = self.tol.dual_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.total() {
            if self.pos[j] != NONBASIC {
                continue;
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == u {
                continue;
            }
            let d = self.reduced_cost(y, j);
            let dir = if d < -dtol && self.x[j] < u {
                1.0
            } else if d > dtol && self.x[j] > l {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, b)| d.abs() > b) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> (Step, f64) {
        let ftol = self.tol.feas_tol;
        let ptol = self.tol.pivot_tol;
        // pass one: relaxed bound on the step
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            let a = alpha[i];
            if a.abs() <= ptol {
                continue;
            }
            let j = self.basic[i];
            let rate = -dir * a;
            let relaxed = if rate < 0.0 {
                if !self.lower[j].is_finite() {
                    continue;
                }
                (self.x[j] - self.lower[j] + ftol) / -rate
            } else {
                if !self.upper[j].is_finite() {
                    continue;
                }
                (self.upper[j] - self.x[j] + ftol) / rate
            };
            theta_max = theta_max.min(relaxed);
        }

        // pass two: largest pivot among rows whose exact ratio fits
        let mut chosen: Option<(usize, f64, bool, f64)> = None;
        for i in 0..self.m {
            let a = alpha[i];
            if a.abs() <= ptol {
                continue;
            }
            let j = self.basic[i];
            let rate = -dir * a;
            let (exact, to_upper) = if rate < 0.0 {
                if !self.lower[j].is_finite() {
                    continue;
                }
                ((self.x[j] - self.lower[j]) / -rate, false)
            } else {
                if !self.upper[j].is_finite() {
                    continue;
                }
                ((self.upper[j] - self.x[j]) / rate, true)
            };
            if exact > theta_max {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((ci, cexact, _, ca)) => {
                    if bland {
                        exact < cexact || (exact == cexact && j < self.basic[ci])
                    } else {
                        a.abs() > ca || (a.abs() == ca && j < self.basic[ci])
                    }
                }
            };
            if better {
                chosen = Some((i, exact, to_upper, a.abs()));
            }
        }

        let flip_range = if dir > 0.0 {
            self.upper[q] - self.x[q]
        } else {
            self.x[q] - self.lower[q]
        };
        match chosen {
            Some((row, exact, to_upper, _)) => {
                let theta = exact.max(0.0);
                if flip_range.is_finite() && flip_range <= theta {
                    (Step::Flip, flip_range)
                } else {
                    (Step::Pivot { row, to_upper }, theta)
                }
            }
            None if flip_range.is_finite() => (Step::Flip, flip_range),
            None => (Step::Unbounded, f64::INFINITY),
        }
    }

    fn update_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let pivot = alpha[r];
        for k in 0..m {
            let mut col = self.binv.column_mut(k);
            let v = col[r] / pivot;
            if v != 0.0 {
                for i in 0..m {
                    col[i] -= alpha[i] * v;
                }
            }
            col[r] = v;
        }
    }

    fn iterate(&mut self) -> Outcome {
        self.degenerate_run = 0;
        loop {
            if self.pivots >= self.tol.max_pivots {
                return Outcome::IterationLimit;
            }
            if self.since_refactor >= self.tol.refactor_interval && !self.refactor() {
                trace!("basis refactorization failed, continuing with updated inverse");
            }
            let bland = self.degenerate_run >= self.tol.degeneracy_limit;
            let y = self.btran();
            let Some((q, dir)) = self.price(&y, bland) else {
                return Outcome::Optimal;
            };
            let alpha = self.ftran(q);
            let (step, theta) = self.ratio_test(q, dir, &alpha, bland);
            self.pivots += 1;
            match step {
                Step::Unbounded => return Outcome::Unbounded,
                Step::Flip => {
                    for i in 0..self.m {
                        self.x[self.basic[i]] -= dir * theta * alpha[i];
                    }
                    self.state[q] = if dir > 0.0 { Rest::Upper } else { Rest::Lower };
                    self.x[q] = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                    self.degenerate_run = 0;
                }
                Step::Pivot { row, to_upper } => {
                    for i in 0..self.m {
                        self.x[self.basic[i]] -= dir * theta * alpha[i];
                    }
                    self.x[q] += dir * theta;
                    let leaving = self.basic[row];
                    self.x[leaving] = if to_upper {
                        self.upper[leaving]
                    } else {
                        self.lower[leaving]
                    };
                    self.state[leaving] = if to_upper { Rest::Upper } else { Rest::Lower };
                    self.pos[leaving] = NONBASIC;
                    self.update_inverse(row, &alpha);
                    self.basic[row] = q;
                    self.pos[q] = row;
                    self.since_refactor += 1;
                    if theta <= 1e-12 {
                        self.degenerate_run += 1;
                    } else {
                        self.degenerate_run = 0;
                    }
                }
            }
        }
    }

    fn finish(mut self, status: LpStatus) -> LpSolution {
        let (n, me, mi) = (self.n, self.me, self.mi);
        if status == LpStatus::Optimal && self.since_refactor > 0 {
            // a few product-form updates keep the inverse accurate
            self.recompute_basic_values();
            if (self.since_refactor > FINAL_REFACTOR_AFTER || !self.residual_is_small())
                && !self.refactor()
            {
                trace!("final refactorization failed");
            }
        }
        let primal = DVector::from_column_slice(&self.x[..n]);
        let objective = self.p.cost.dot(&primal);
        let (duals_eq, duals_ineq, reduced_costs) = if status == LpStatus::Optimal {
            let y = self.btran();
            let lambda = DVector::from_column_slice(&y[..me]);
            let pi = DVector::from_iterator(mi, y[me..].iter().map(|v| -v));
            let z = DVector::from_iterator(
                n,
                (0..n).map(|j| {
                    if self.pos[j] == NONBASIC {
                        self.reduced_cost(&y, j)
                    } else {
                        0.0
                    }
                }),
            );
            (lambda, pi, z)
        } else {
            (DVector::zeros(me), DVector::zeros(mi), DVector::zeros(n))
        };
        let basis = (status == LpStatus::Optimal).then(|| Basis {
            shape: (n, me, mi),
            basic: self.basic.clone(),
            state: self.state.clone(),
            factor: Some(Arc::new(Factor {
                columns: self.basic_columns_entries(),
                binv: self.binv.clone(),
            })),
        });
        LpSolution {
            status,
            primal,
            duals_eq,
            duals_ineq,
            reduced_costs,
            objective,
            pivots: self.pivots,
            basis,
        }
    }
}
