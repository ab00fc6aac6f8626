//! Solves 9 crane instances with perturbed start and end points on all available cores and
//! prints one line per instance. CSV logs go to the system temp directory.
//!
//! `cargo run --release --example bench`

use fslp::experiments::{run_bench, RunConfig};

fn main() -> fslp::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.bench.instances = 9;
    let out = std::env::temp_dir().join("fslp-bench");
    std::fs::create_dir_all(&out)?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_bench(&cfg, jobs, &out)?;
    for row in &report.rows {
        println!(
            "{:>2}  A ({:+.3}, {:+.3})  B ({:+.3}, {:+.3})  {:<10} {:>3} iterations  T = {}",
            row.instance,
            row.start[0],
            row.start[1],
            row.end[0],
            row.end[1],
            row.status,
            row.outer_iterations,
            row.final_time.map_or("-".into(), |t| format!("{t:.5}"))
        );
    }
    println!(
        "optimal {:.0}%, summary {}",
        100.0 * report.optimal_fraction(),
        report.summary_path.display()
    );
    Ok(())
}
