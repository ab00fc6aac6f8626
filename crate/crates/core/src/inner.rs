//! Zero-order feasibility iterations.
//!
//! Starting from the trust-region LP step `w̄`, each iteration re-evaluates the constraint
//! residual at the current iterate, folds its higher-order part into `δ`, and re-solves the
//! parametric LP with the Jacobian frozen at the outer iterate `ŵ`. Only `g` is evaluated;
//! no derivatives. The iteration contracts at a rate proportional to the trust-region radius.
//!
//! Termination heuristic:
//! * converged when `h(w_l) <= sigma_inner` and the projection ratio
//!   `‖w̄ - w_l‖ / ‖w̄ - ŵ‖` is below `ratio_accept`;
//! * aborted when the projection ratio exceeds `ratio_abort` after any solve;
//! * watchdog: every `n_watch` solves, aborted unless the geometric mean of the contraction
//!   estimates over that window is below `kappa_watch` and the projection ratio is below
//!   `ratio_accept`;
//! * aborted after `n_max` solves.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{FslpError, Result};
use crate::lp::{solve_lp_warm, Basis, LpStatus, LpTolerances};
use crate::nlp::{Linearization, NlpProblem};
use crate::subproblem::build_plp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerParams {
    pub sigma_inner: f64,
    pub n_watch: usize,
    pub kappa_watch: f64,
    pub n_max: usize,
    pub ratio_abort: f64,
    pub ratio_accept: f64,
}

impl Default for InnerParams {
    fn default() -> Self {
        Self {
            sigma_inner: 1e-7,
            n_watch: 5,
            kappa_watch: 0.3,
            n_max: 50,
            ratio_abort: 1.0,
            ratio_accept: 0.5,
        }
    }
}

impl InnerParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(FslpError::Config(m.to_string()));
        if !(self.sigma_inner > 0.0 && self.sigma_inner < 1e-5) {
            return fail("sigma_inner must lie in (0, 1e-5)");
        }
        if self.n_watch == 0 {
            return fail("n_watch must be positive");
        }
        if !(self.kappa_watch > 0.0 && self.kappa_watch < 1.0) {
            return fail("kappa_watch must lie in (0, 1)");
        }
        if self.n_max == 0 {
            return fail("n_max must be positive");
        }
        if !(self.ratio_accept > 0.0 && self.ratio_accept < self.ratio_abort) {
            return fail("need 0 < ratio_accept < ratio_abort");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerStatus {
    Converged,
    Watchdog,
    RatioExceeded,
    MaxIter,
    /// The parametric LP had no optimal solution.
    PlpFailure,
}

impl InnerStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            InnerStatus::Converged => "converged",
            InnerStatus::Watchdog => "watchdog",
            InnerStatus::RatioExceeded => "ratio_exceeded",
            InnerStatus::MaxIter => "max_iter",
            InnerStatus::PlpFailure => "plp_failure",
        }
    }
}

/// One inner iterate `w_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerIterate {
    pub l: usize,
    pub infeasibility: f64,
    pub projection_ratio: f64,
    /// `‖w_l - w_{l-1}‖ / ‖w_{l-1} - w_{l-2}‖`, the contraction estimate of the step that
    /// produced `w_l`.
    pub kappa: Option<f64>,
    /// `‖P_y (w_l - ŵ)‖_∞`.
    pub tr_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerTrace {
    pub iterates: Vec<InnerIterate>,
    pub status: InnerStatus,
    /// Parametric LP solves performed.
    pub plp_solves: usize,
}

impl InnerTrace {
    /// Geometric mean of all defined, positive contraction estimates.
    pub fn mean_kappa(&self) -> Option<f64> {
        geometric_mean(self.iterates.iter().filter_map(|it| it.kappa))
    }
}

pub(crate) fn geometric_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut log_sum, mut count) = (0.0, 0usize);
    for v in values {
        if v <= 0.0 {
            return Some(0.0);
        }
        log_sum += v.ln();
        count += 1;
    }
    (count > 0).then(|| (log_sum / count as f64).exp())
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    /// The feasible projection `w̃`, present iff the trace status is `Converged`.
    pub point: Option<DVector<f64>>,
    pub trace: InnerTrace,
}

/// `δ(w_l, ŵ) = g(P_y w_l) - g(P_y ŵ) - G'(w_l - ŵ)` for an already evaluated `g(P_y w_l)`.
pub fn delta_with(lin: &Linearization, w: &DVector<f64>, g_w: &DVector<f64>) -> DVector<f64> {
    g_w - &lin.g_at_base - &lin.fixed_jacobian * (w - &lin.base_point)
}

/// `δ(w_l, ŵ)`, evaluating `g` at `w_l`.
pub fn delta(p: &NlpProblem, lin: &Linearization, w: &DVector<f64>) -> Result<DVector<f64>> {
    let g = p.eval_g(w)?;
    Ok(delta_with(lin, w, &g))
}

/// `κ_l = ‖w_{l+1} - w_l‖ / ‖w_l - w_{l-1}‖`; `None` when successive iterates coincide.
pub fn contraction_estimate(
    next: &DVector<f64>,
    current: &DVector<f64>,
    previous: &DVector<f64>,
) -> Option<f64> {
    let denom = (current - previous).norm();
    (denom > 0.0).then(|| (next - current).norm() / denom)
}

/// Projects the LP step `w̄` onto the feasible set by repeated parametric LP solves.
///
/// `warm` is the basis of the trust-region LP that produced `w̄`. The first solve warm-starts
/// from it and each later solve from the previous parametric basis, since only the equality
/// right-hand side changes between them.
#[allow(clippy::too_many_arguments)]
pub fn run_inner(
    p: &NlpProblem,
    lin: &Linearization,
    w_bar: &DVector<f64>,
    radius: f64,
    params: &InnerParams,
    lp_tol: &LpTolerances,
    warm: Option<&Basis>,
) -> Result<InnerOutcome> {
    let w_hat = &lin.base_point;
    let part = &p.partition;
    let ref_norm = (w_bar - w_hat).norm();
    let ratio_of = |w: &DVector<f64>| {
        if ref_norm > 0.0 {
            (w_bar - w).norm() / ref_norm
        } else {
            0.0
        }
    };
    let converged = |h: f64, ratio: f64| h <= params.sigma_inner && ratio < params.ratio_accept;

    let mut basis = warm.cloned();
    let mut iterates = Vec::new();
    let mut window: Vec<Option<f64>> = Vec::new();

    let mut w = w_bar.clone();
    let mut g_w = p.eval_g(&w)?;
    let mut prev: Option<DVector<f64>> = None;
    let mut kappa_in: Option<f64> = None;
    let mut h = p.infeasibility_with(&w, &g_w);
    let mut ratio = 0.0;
    let mut plp_solves = 0;

    let finish = |iterates: Vec<InnerIterate>, status, plp_solves, point| {
        Ok(InnerOutcome {
            point,
            trace: InnerTrace {
                iterates,
                status,
                plp_solves,
            },
        })
    };

    for l in 0.. {
        iterates.push(InnerIterate {
            l,
            infeasibility: h,
            projection_ratio: ratio,
            kappa: kappa_in,
            tr_distance: part.y_max_norm(&(&w - w_hat)),
        });
        if converged(h, ratio) {
            return finish(iterates, InnerStatus::Converged, plp_solves, Some(w));
        }
        if l >= params.n_max {
            return finish(iterates, InnerStatus::MaxIter, plp_solves, None);
        }

        let d = delta_with(lin, &w, &g_w);
        let plp = build_plp(&d, lin, p, radius);
        let sol = solve_lp_warm(&plp.lp, lp_tol, basis.as_ref())?;
        plp_solves += 1;
        if sol.status != LpStatus::Optimal {
            return finish(iterates, InnerStatus::PlpFailure, plp_solves, None);
        }
        basis = sol.basis.clone();
        let next = sol.primal;

        kappa_in = prev
            .as_ref()
            .and_then(|pr| contraction_estimate(&next, &w, pr));
        if l > 0 {
            window.push(kappa_in);
        }
        g_w = p.eval_g(&next)?;
        h = p.infeasibility_with(&next, &g_w);
        ratio = ratio_of(&next);
        prev = Some(std::mem::replace(&mut w, next));

        if converged(h, ratio) {
            continue;
        }
        let solves = l + 1;
        let watchdog_due = solves % params.n_watch == 0;
        let abort = if ratio > params.ratio_abort {
            Some(InnerStatus::RatioExceeded)
        } else if watchdog_due {
            let from = window.len().saturating_sub(params.n_watch);
            let kappa = geometric_mean(window[from..].iter().map(|k| k.unwrap_or(0.0)));
            let slow = kappa.is_some_and(|k| k >= params.kappa_watch);
            (slow || ratio >= params.ratio_accept).then_some(InnerStatus::Watchdog)
        } else {
            None
        };
        if let Some(status) = abort {
            iterates.push(InnerIterate {
                l: l + 1,
                infeasibility: h,
                projection_ratio: ratio,
                kappa: kappa_in,
                tr_distance: part.y_max_norm(&(&w - w_hat)),
            });
            return finish(iterates, status, plp_solves, None);
        }
    }
    unreachable!("inner loop exits through its termination tests")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::{FnConstraints, VariablePartition};
    use nalgebra::{dmatrix, dvector, DMatrix};
    use std::sync::Arc;

    fn scalar_square() -> NlpProblem {
        // w = (y, s): y^2 - s = 0 with s free of cost
        let g = FnConstraints::new(
            1,
            1,
            |y: &DVector<f64>| dvector![y[0] * y[0]],
            |y: &DVector<f64>| dmatrix![2.0 * y[0]],
        );
        NlpProblem::new(
            dvector![0.0, 1.0],
            dmatrix![0.0, -1.0],
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            Arc::new(g),
            VariablePartition::new(2, vec![0], vec![], vec![1]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn delta_hand_value() {
        let p = scalar_square();
        let lin = p.linearize(&dvector![1.0, 1.0]).unwrap();
        let d = delta(&p, &lin, &dvector![2.0, 0.0]).unwrap();
        assert_eq!(d, dvector![1.0]);
        let d0 = delta(&p, &lin, &dvector![1.0, 1.0]).unwrap();
        assert_eq!(d0, dvector![0.0]);
    }

    #[test]
    fn contraction_examples() {
        let a = dvector![0.0, 0.0];
        let b = dvector![1.0, 2.0];
        let c = &b + (&b - &a) * 0.5;
        assert!((contraction_estimate(&c, &b, &a).unwrap() - 0.5).abs() < 1e-15);
        let d = &b + (&b - &a);
        assert!((contraction_estimate(&d, &b, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(contraction_estimate(&b, &a, &a), None);
    }

    #[test]
    fn geometric_mean_handles_zero() {
        assert_eq!(geometric_mean([0.5, 0.0].into_iter()), Some(0.0));
        assert_eq!(geometric_mean(std::iter::empty()), None);
        let m = geometric_mean([0.25, 1.0].into_iter()).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(InnerParams::default().validate().is_ok());
        let bad = InnerParams {
            kappa_watch: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = InnerParams {
            ratio_accept: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
