//! Runs FSLP on `min w2 s.t. w2 >= w1^2, w2 >= 0.1 w1 + eps` from (2, 10) for both signs of
//! `eps` and prints the distance to the minimizer per outer iteration.
//!
//! `cargo run --example illustrative`

use fslp::illustrative;
use fslp::outer::{solve, SolverParams};

fn main() -> fslp::Result<()> {
    for eps in [0.06, -0.06] {
        let p = illustrative::problem(eps);
        let w0 = illustrative::start_point(&p, 2.0, 10.0)?;
        let res = solve(&p, &w0, &SolverParams::default())?;
        let (a, b) = illustrative::known_optimum(eps).expect("reference eps");
        println!(
            "eps = {eps}: {} after {} iterations",
            res.status.as_str(),
            res.history.len()
        );
        for (k, w) in res.iterates.iter().enumerate() {
            println!(
                "  {k:>3}  w = ({:+.12}, {:+.12})  error = {:.3e}",
                w[0],
                w[1],
                (w[0] - a).hypot(w[1] - b)
            );
        }
    }
    Ok(())
}
