//! Solves the default time-optimal crane problem and prints the outer history and the final
//! payload path.
//!
//! `cargo run --release --example crane`

use fslp::crane::CraneConfig;
use fslp::experiments::solve_crane;
use fslp::outer::SolverParams;

fn main() -> fslp::Result<()> {
    let run = solve_crane(&CraneConfig::default(), &SolverParams::default())?;
    let res = &run.result;
    println!(
        "{:>3} {:>14} {:>9} {:>9} {:>8} {:>10} {:>9}",
        "k", "objective", "radius", "rho", "accepted", "inner", "slack"
    );
    for r in &res.history {
        println!(
            "{:>3} {:>14.6} {:>9.4} {:>9} {:>8} {:>10} {:>9.2e}",
            r.k,
            r.objective,
            r.radius,
            r.rho.map_or("-".into(), |v| format!("{v:.4}")),
            r.accepted,
            r.inner_status.as_str(),
            r.ocp_slack_norm
        );
    }
    println!(
        "{} after {} iterations, zero slack at {:?}, T = {:.6} s, {:.2} s",
        res.status.as_str(),
        res.history.len(),
        run.first_zero_slack_iteration(),
        run.final_time(),
        run.seconds
    );
    for (k, p) in run
        .problem
        .layout
        .payload_path(&res.final_point)
        .iter()
        .enumerate()
    {
        println!("  stage {k:>2}: p = ({:+.4}, {:+.4})", p[0], p[1]);
    }
    Ok(())
}
