//! Two-variable problem `min w2  s.t.  w2 >= w1^2,  w2 >= 0.1 w1 + eps`.
//!
//! For `eps = 0.06` the minimizer `(-0.2, 0.04)` is a vertex of the linearized constraints
//! (fully determined); for `eps = -0.06` the minimizer `(0, 0)` is not.
//! The parabola constraint is written as `w1^2 - w2 + s = 0, s >= 0`, so `w = (w1, w2, s)`.

use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DVector};

use crate::error::Result;
use crate::nlp::{FnConstraints, NlpProblem, VariablePartition};

pub fn problem(eps: f64) -> NlpProblem {
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
        VariablePartition::new(3, vec![0, 1], vec![], vec![2]).expect("static partition"),
    )
    .expect("static dimensions")
}

/// `(w1, w2)` completed with its minimal slack.
pub fn start_point(p: &NlpProblem, w1: f64, w2: f64) -> Result<DVector<f64>> {
    p.with_minimal_slack(&dvector![w1, w2])
}

/// Closed-form minimizer for the two reference values of `eps`.
pub fn known_optimum(eps: f64) -> Option<(f64, f64)> {
    if eps == 0.06 {
        Some((-0.2, 0.04))
    } else if eps == -0.06 {
        Some((0.0, 0.0))
    } else {
        None
    }
}
