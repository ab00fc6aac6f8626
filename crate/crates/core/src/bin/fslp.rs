//! Command-line entry point for the FSLP experiments.
//!
//! Exit status: 0 optimal, 2 non-optimal termination, 3 configuration error,
//! 4 infeasible initialization.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fslp::experiments::{
    self, exit_code, has_superlinear_tail, status_code, RunConfig, STUDY_RADII,
};
use fslp::{FslpError, Result};

#[derive(Parser)]
#[command(
    name = "fslp",
    version,
    about = "Feasible sequential linear programming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory for CSV logs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// TOML file with [solver], [crane] and [bench] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set kappa_watch=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// min w2 s.t. w2 >= w1^2, w2 >= 0.1 w1 + eps.
    Illustrative {
        /// Values of eps; repeat the flag for several runs.
        #[arg(long, allow_negative_numbers = true, default_values_t = [0.06, -0.06])]
        eps: Vec<f64>,
        /// Starting point `w1,w2`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [2.0, 10.0], allow_negative_numbers = true)]
        start: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Time-optimal overhead crane motion around the obstacle.
    Crane {
        #[command(flatten)]
        common: Common,
    },
    /// Feasibility iterations of the first crane step for several trust-region radii.
    InnerStudy {
        /// Descending comma-separated radii.
        #[arg(long, value_delimiter = ',', default_values_t = STUDY_RADII)]
        radii: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Perturbed crane instances.
    Bench {
        /// Overrides `bench.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&common.sets)?;
    Ok(cfg)
}

fn check_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| FslpError::Config(format!("output directory {}: {e}", dir.display())))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Illustrative { eps, start, common } => {
            let cfg = load(&common)?;
            check_out(&common.out)?;
            let runs = experiments::run_illustrative(
                &eps,
                (start[0], start[1]),
                &cfg.solver,
                &common.out,
            )?;
            let mut code = 0;
            for r in &runs {
                let (w1, w2) = r.final_point();
                let tail = r.errors.as_deref().map(has_superlinear_tail);
                println!(
                    "eps={} status={} iterations={} w=({w1:.10}, {w2:.10}) error={} superlinear_tail={}",
                    r.eps,
                    r.result.status.as_str(),
                    r.result.history.len(),
                    r.errors.as_ref().and_then(|e| e.last()).map_or("-".into(), |e| format!("{e:.3e}")),
                    tail.map_or("-".into(), |t| t.to_string()),
                );
                code = code.max(status_code(r.result.status));
            }
            Ok(code)
        }
        Command::Crane { common } => {
            let cfg = load(&common)?;
            check_out(&common.out)?;
            let run = experiments::run_crane(&cfg, &common.out)?;
            let res = &run.result;
            println!(
                "status={} iterations={} accepted={} zero_slack_iteration={} T={:.10} seconds={:.2}",
                res.status.as_str(),
                res.history.len(),
                res.accepted_steps(),
                run.first_zero_slack_iteration().map_or("none".into(), |k| k.to_string()),
                run.final_time(),
                run.seconds
            );
            Ok(status_code(res.status))
        }
        Command::InnerStudy { radii, common } => {
            let cfg = load(&common)?;
            check_out(&common.out)?;
            let rows = experiments::run_inner_study(&cfg, &radii, &common.out)?;
            for r in &rows {
                println!(
                    "radius={} status={} solves={} final_ratio={} mean_kappa={}",
                    r.radius,
                    r.trace.status.as_str(),
                    r.trace.plp_solves,
                    r.final_ratio().map_or("-".into(), |v| format!("{v:.4}")),
                    r.trace
                        .mean_kappa()
                        .map_or("-".into(), |v| format!("{v:.4}")),
                );
            }
            Ok(0)
        }
        Command::Bench { seed, jobs, common } => {
            let mut cfg = load(&common)?;
            if let Some(s) = seed {
                cfg.bench.seed = s;
            }
            check_out(&common.out)?;
            let report = experiments::run_bench(&cfg, jobs, &common.out)?;
            println!(
                "instances={} optimal={:.1}% summary={}",
                report.rows.len(),
                100.0 * report.optimal_fraction(),
                report.summary_path.display()
            );
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
