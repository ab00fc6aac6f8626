//! Transcription checks for the crane problem: dimensions, Jacobians against central
//! differences, the RK4 order and consistency of solutions with a fresh simulation.

mod common;

use common::{feasible_points, resimulate, rk4_slope};
use fslp::crane::{build_tocp, feasible_initialization, CraneConfig};
use fslp::experiments::solve_crane;
use fslp::outer::SolverParams;

#[test]
fn default_layout_dimensions() {
    let p = build_tocp(&CraneConfig::default()).unwrap();
    // 21 states of 6, 20 controls of 2, 20 hyperplanes of 3, T, 12 endpoint and 20 obstacle slacks
    assert_eq!(p.layout.n_w(), 21 * 6 + 20 * 2 + 20 * 3 + 1 + 12 + 20);
    assert_eq!(p.layout.n_w(), 259);
    assert_eq!(p.nlp.num_eq(), 20 * 6 + 20);
    assert_eq!(p.nlp.partition.n_y(), 227);
}

#[test]
fn initialization_is_feasible_with_minimal_slacks() {
    let p = build_tocp(&CraneConfig::default()).unwrap();
    let w0 = feasible_initialization(&p).unwrap();
    assert!(p.nlp.infeasibility(&w0).unwrap() <= 1e-7);
    assert_eq!(p.horizon_time(&w0), 2.5);
    let lay = &p.layout;
    let d0 = lay.state_of(&w0, 0) - p.start_state();
    let dn = lay.state_of(&w0, lay.horizon) - p.end_state();
    for i in 0..6 {
        assert_eq!(w0[lay.s0() + i], d0[i].abs());
        assert_eq!(w0[lay.s_end() + i], dn[i].abs());
    }
    for k in 0..lay.horizon {
        assert_eq!(lay.control_of(&w0, k).as_slice(), &[0.0, 0.1]);
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let p = build_tocp(&CraneConfig::default()).unwrap();
    let w0 = feasible_initialization(&p).unwrap();
    let points = feasible_points(&p);
    assert_eq!(points.len(), 6);
    assert_eq!(points[0], w0);
    for (i, w) in points.iter().enumerate() {
        assert!(
            p.nlp.infeasibility(w).unwrap() <= 1e-7,
            "point {i} infeasible"
        );
        let y = p.nlp.partition.select_y(w);
        let err = p.nlp.jacobian_error(&y, 1e-6).unwrap();
        assert!(err <= 1e-6, "point {i}: jacobian error {err:e}");
    }
}

#[test]
fn simulated_points_have_no_shooting_gaps() {
    let p = build_tocp(&CraneConfig::default()).unwrap();
    for mut w in feasible_points(&p) {
        resimulate(&p, &mut w);
        let g = p.nlp.eval_g(&w).unwrap();
        let gaps = p.nlp.eq_residual_with(&w, &g);
        let worst = gaps.rows(0, 6 * p.layout.horizon).amax();
        assert!(worst <= 1e-10, "shooting gap {worst:e}");
    }
}

#[test]
fn solution_agrees_with_a_fresh_simulation() {
    let run = solve_crane(&CraneConfig::default(), &SolverParams::default()).unwrap();
    let p = &run.problem;
    let w = &run.result.final_point;
    let mut sim = w.clone();
    resimulate(p, &mut sim);
    let lay = &p.layout;
    for k in 0..=lay.horizon {
        let gap = (lay.state_of(&sim, k) - lay.state_of(w, k)).amax();
        assert!(gap <= 1e-6, "stage {k}: gap {gap:e}");
    }
    assert!((lay.state_of(w, 0) - p.start_state()).amax() <= 1e-6);
    assert!((lay.state_of(w, lay.horizon) - p.end_state()).amax() <= 1e-6);
    // every payload position keeps its distance from the obstacle
    let obstacle = p.config.obstacle().unwrap();
    for q in lay.payload_path(w) {
        assert!(obstacle.distance(q) >= p.config.r_load - 1e-6, "{q:?}");
    }
}

#[test]
fn rk4_has_order_four() {
    let slope = rk4_slope(&[2, 4, 8, 16, 32, 64]);
    assert!((slope - 4.0).abs() <= 0.2, "slope {slope}");
}
