//! Runs the feasibility iterations of the first crane step for radii 1 to 1/16 and prints
//! their status and contraction estimates. CSV logs go to the system temp directory.
//!
//! `cargo run --release --example inner_study`

use fslp::experiments::{run_inner_study, RunConfig, STUDY_RADII};

fn main() -> fslp::Result<()> {
    let out = std::env::temp_dir().join("fslp-inner-study");
    std::fs::create_dir_all(&out)?;
    for row in run_inner_study(&RunConfig::default(), &STUDY_RADII, &out)? {
        let kappas: Vec<String> = row
            .trace
            .iterates
            .iter()
            .map(|it| it.kappa.map_or("-".into(), |k| format!("{k:.3}")))
            .collect();
        println!(
            "radius {:<7} {:<15} mean kappa {:<8} kappa [{}]",
            row.radius,
            row.trace.status.as_str(),
            row.trace
                .mean_kappa()
                .map_or("-".into(), |k| format!("{k:.4}")),
            kappas.join(", ")
        );
    }
    println!("logs in {}", out.display());
    Ok(())
}
