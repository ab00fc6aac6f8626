//! Solves a small LP with equality, inequality and bound rows, prints the vertex and its
//! multipliers, then re-solves a perturbed right-hand side from the previous basis.
//!
//! `cargo run --example lp_basics`

use fslp::lp::{solve_lp, solve_lp_warm, LpProblem, LpTolerances};
use nalgebra::{dmatrix, dvector};

fn main() -> fslp::Result<()> {
    // min -x - 2y s.t. x + y + z = 4, x - y <= 1, 0 <= x, y, z <= 3
    let build = |rhs: f64| {
        LpProblem::new(dvector![-1.0, -2.0, 0.0])
            .with_equalities(dmatrix![1.0, 1.0, 1.0], dvector![rhs])
            .with_inequalities(dmatrix![1.0, -1.0, 0.0], dvector![-1.0])
            .with_bounds(dvector![0.0, 0.0, 0.0], dvector![3.0, 3.0, 3.0])
    };
    let tol = LpTolerances::default();

    let p = build(4.0);
    let sol = solve_lp(&p, &tol)?;
    println!("status     {:?}", sol.status);
    println!("w          {:?}", sol.primal.as_slice());
    println!("objective  {}", sol.objective);
    println!("lambda     {:?}", sol.duals_eq.as_slice());
    println!("pi         {:?}", sol.duals_ineq.as_slice());
    println!("z          {:?}", sol.reduced_costs.as_slice());
    println!("kkt        {:.2e}", sol.kkt_residual(&p));
    println!("pivots     {}", sol.pivots);

    let q = build(4.5);
    let warm = solve_lp_warm(&q, &tol, sol.basis.as_ref())?;
    println!(
        "warm w     {:?} after {} pivots",
        warm.primal.as_slice(),
        warm.pivots
    );
    Ok(())
}
