//! The simplex solver against brute-force vertex enumeration on small random LPs.

mod common;

use common::{enumerate_vertices, random_lp};
use fslp::lp::{solve_lp, solve_lp_warm, LpProblem, LpStatus, LpTolerances};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_lps_match_vertex_enumeration() {
    let tol = LpTolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..300 {
        let p = random_lp(&mut rng, case % 2 == 1);
        let sol = solve_lp(&p, &tol).unwrap();
        match enumerate_vertices(&p) {
            Some(best) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}: {p:?}");
                assert!(
                    (sol.objective - best).abs() <= 1e-8,
                    "case {case}: {} vs {best}",
                    sol.objective
                );
                assert!(
                    (p.objective(&sol.primal) - best).abs() <= 1e-8,
                    "case {case}"
                );
                assert!(
                    sol.kkt_residual(&p) <= 1e-7,
                    "case {case}: kkt {}",
                    sol.kkt_residual(&p)
                );
                optimal += 1;
            }
            None => {
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}: {p:?}");
                infeasible += 1;
            }
        }
    }
    assert!(optimal >= 100, "only {optimal} optimal cases");
    assert!(infeasible >= 5, "only {infeasible} infeasible cases");
}

#[test]
fn unbounded_directions_are_reported() {
    let tol = LpTolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let mut p = random_lp(&mut rng, false);
        if solve_lp(&p, &tol).unwrap().status != LpStatus::Optimal {
            continue;
        }
        // a new free variable that no row sees, with a descent cost
        let n = p.num_vars();
        let cost = p.cost.clone().insert_row(n, -1.0);
        p = LpProblem::new(cost)
            .with_equalities(p.eq_matrix.clone().insert_column(n, 0.0), p.eq_rhs.clone())
            .with_inequalities(
                p.ineq_matrix.clone().insert_column(n, 0.0),
                p.ineq_rhs.clone(),
            )
            .with_bounds(
                p.lower.clone().insert_row(n, f64::NEG_INFINITY),
                p.upper.clone().insert_row(n, f64::INFINITY),
            );
        assert_eq!(solve_lp(&p, &tol).unwrap().status, LpStatus::Unbounded);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solves_are_deterministic(seed in any::<u64>(), integer in any::<bool>()) {
        let p = random_lp(&mut ChaCha8Rng::seed_from_u64(seed), integer);
        let tol = LpTolerances::default();
        let a = solve_lp(&p, &tol).unwrap();
        let b = solve_lp(&p, &tol).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.pivots, b.pivots);
        prop_assert_eq!(a.primal.as_slice(), b.primal.as_slice());
        prop_assert_eq!(a.duals_eq.as_slice(), b.duals_eq.as_slice());
        prop_assert_eq!(a.duals_ineq.as_slice(), b.duals_ineq.as_slice());
    }

    #[test]
    fn warm_start_reaches_the_cold_optimum(seed in any::<u64>(), shift in -0.2f64..0.2) {
        let p = random_lp(&mut ChaCha8Rng::seed_from_u64(seed), false);
        let tol = LpTolerances::default();
        let first = solve_lp(&p, &tol).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let mut q = p.clone();
        q.ineq_rhs.add_scalar_mut(shift);
        q.eq_rhs.add_scalar_mut(shift);
        let cold = solve_lp(&q, &tol).unwrap();
        let warm = solve_lp_warm(&q, &tol, first.basis.as_ref()).unwrap();
        prop_assert_eq!(cold.status, warm.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!((cold.objective - warm.objective).abs() <= 1e-8);
            prop_assert!(warm.kkt_residual(&q) <= 1e-7);
        }
    }
}
