//! Reproducible experiment runs writing CSV logs.
//!
//! Floats are written with 17 significant digits so that every value reads back exactly.
//! Missing values (no ratio on a rejected step, no known optimum) are empty fields.

mod config;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::crane::{
    build_tocp, feasible_initialization, perturb_problems, CraneConfig, CraneProblem,
};
use crate::error::{FslpError, Result};
use crate::illustrative;
use crate::inner::{run_inner, InnerStatus, InnerTrace};
use crate::lp::{solve_lp_warm, LpStatus};
use crate::outer::{self, IterationRecord, SolveResult, SolveStatus, SolverParams};
use crate::subproblem::build_trust_region_lp;

pub use config::{BenchConfig, RunConfig};

/// Endpoint slack norm below which a crane iterate counts as meeting its boundary conditions.
pub const ZERO_SLACK_TOL: f64 = 1e-6;

pub const OUTER_HEADER: [&str; 13] = [
    "k",
    "objective",
    "infeasibility",
    "radius",
    "model_decrease",
    "step_norm",
    "rho",
    "accepted",
    "inner_iterations",
    "inner_status",
    "projection_ratio",
    "slack_norm",
    "horizon_time",
];
pub const ILLUSTRATIVE_HEADER: [&str; 11] = [
    "eps",
    "k",
    "w1",
    "w2",
    "error",
    "objective",
    "radius",
    "model_decrease",
    "rho",
    "accepted",
    "inner_status",
];
pub const INNER_HEADER: [&str; 7] = [
    "outer_k",
    "inner_l",
    "h",
    "ratio",
    "kappa",
    "tr_distance",
    "status",
];
pub const TRAJECTORY_HEADER: [&str; 5] = ["iterate", "outer_k", "stage", "p_x", "p_y"];
pub const INNER_STUDY_HEADER: [&str; 7] = [
    "radius",
    "l",
    "h",
    "ratio",
    "kappa",
    "tr_distance",
    "status",
];
pub const INNER_STUDY_SUMMARY_HEADER: [&str; 6] = [
    "radius",
    "status",
    "plp_solves",
    "final_h",
    "final_ratio",
    "mean_kappa",
];
pub const BENCH_HEADER: [&str; 11] = [
    "instance",
    "start_x",
    "start_y",
    "end_x",
    "end_y",
    "status",
    "outer_iterations",
    "accepted_steps",
    "constraint_evaluations",
    "zero_slack_iteration",
    "final_time",
];

/// Exit status of the command-line tool for an error.
pub fn exit_code(err: &FslpError) -> i32 {
    match err {
        FslpError::Config(_) => 3,
        FslpError::Initialization(_)
        | FslpError::InfeasibleStart(_)
        | FslpError::NoFeasibleSlack(_) => 4,
        FslpError::Io(_) | FslpError::Csv(_) => 1,
        _ => 2,
    }
}

/// Exit status for a finished solve.
pub fn status_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Optimal => 0,
        _ => 2,
    }
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn opt_count(v: Option<usize>) -> String {
    v.map(|c| c.to_string()).unwrap_or_default()
}

fn writer(dir: &Path, name: &str, header: &[&str]) -> Result<csv::Writer<File>> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    Ok(w)
}

/// `ŵ_k` for every outer record: the iterate advances after each accepted step.
fn base_points(res: &SolveResult) -> Vec<&DVector<f64>> {
    let mut idx = 0;
    res.history
        .iter()
        .map(|rec| {
            let w = &res.iterates[idx];
            if rec.accepted {
                idx += 1;
            }
            w
        })
        .collect()
}

fn outer_row(rec: &IterationRecord, horizon_time: Option<f64>) -> Vec<String> {
    vec![
        rec.k.to_string(),
        float(rec.objective),
        float(rec.infeasibility),
        float(rec.radius),
        float(rec.model_decrease),
        float(rec.step_norm),
        opt_float(rec.rho),
        rec.accepted.to_string(),
        rec.inner_iterations.to_string(),
        rec.inner_status.as_str().to_string(),
        opt_float(rec.projection_ratio),
        float(rec.ocp_slack_norm),
        opt_float(horizon_time),
    ]
}

fn write_outer(dir: &Path, name: &str, res: &SolveResult, time_index: Option<usize>) -> Result<()> {
    let mut w = writer(dir, name, &OUTER_HEADER)?;
    for (rec, wk) in res.history.iter().zip(base_points(res)) {
        w.write_record(outer_row(rec, time_index.map(|i| wk[i])))?;
    }
    w.flush()?;
    Ok(())
}

fn inner_rows(trace: &InnerTrace) -> impl Iterator<Item = [String; 5]> + '_ {
    trace.iterates.iter().map(move |it| {
        [
            it.l.to_string(),
            float(it.infeasibility),
            float(it.projection_ratio),
            opt_float(it.kappa),
            float(it.tr_distance),
        ]
    })
}

// ---------------------------------------------------------------------------------------
// illustrative

#[derive(Debug, Clone)]
pub struct IllustrativeRun {
    pub eps: f64,
    pub result: SolveResult,
    /// `‖ŵ_k - w*‖` for `ŵ_0` and every accepted iterate, when the optimum is known.
    pub errors: Option<Vec<f64>>,
}

impl IllustrativeRun {
    pub fn final_point(&self) -> (f64, f64) {
        let w = &self.result.final_point;
        (w[0], w[1])
    }
}

/// Solves the two-variable example for each `eps` from `start` and writes `illustrative.csv`.
pub fn run_illustrative(
    eps: &[f64],
    start: (f64, f64),
    params: &SolverParams,
    out: &Path,
) -> Result<Vec<IllustrativeRun>> {
    if let Some(e) = eps.iter().find(|e| !e.is_finite()) {
        return Err(FslpError::Config(format!("eps must be finite, got {e}")));
    }
    let mut w = writer(out, "illustrative.csv", &ILLUSTRATIVE_HEADER)?;
    let mut runs = Vec::new();
    for &e in eps {
        let p = illustrative::problem(e);
        let w0 = illustrative::start_point(&p, start.0, start.1)?;
        let result = outer::solve(&p, &w0, params)?;
        let opt = illustrative::known_optimum(e);
        let err = |v: &DVector<f64>| opt.map(|(a, b)| (v[0] - a).hypot(v[1] - b));
        for (rec, wk) in result.history.iter().zip(base_points(&result)) {
            w.write_record([
                float(e),
                rec.k.to_string(),
                float(wk[0]),
                float(wk[1]),
                opt_float(err(wk)),
                float(rec.objective),
                float(rec.radius),
                float(rec.model_decrease),
                opt_float(rec.rho),
                rec.accepted.to_string(),
                rec.inner_status.as_str().to_string(),
            ])?;
        }
        let errors = opt.map(|_| result.iterates.iter().filter_map(err).collect());
        info!(
            "illustrative eps={e}: {} after {} iterations",
            result.status.as_str(),
            result.history.len()
        );
        runs.push(IllustrativeRun {
            eps: e,
            result,
            errors,
        });
    }
    w.flush()?;
    Ok(runs)
}

/// Whether some error `e_k < 1e-2` is followed by `e_{k+1} <= e_k^1.8`.
pub fn has_superlinear_tail(errors: &[f64]) -> bool {
    errors
        .windows(2)
        .any(|e| e[0] < 1e-2 && e[0] > 0.0 && e[1] <= e[0].powf(1.8))
}

// ---------------------------------------------------------------------------------------
// crane

#[derive(Debug)]
pub struct CraneRun {
    pub problem: CraneProblem,
    pub result: SolveResult,
    pub seconds: f64,
}

impl CraneRun {
    /// Outer iteration at which the endpoint slacks first vanish.
    pub fn first_zero_slack_iteration(&self) -> Option<usize> {
        self.result.first_zero_slack_iteration(ZERO_SLACK_TOL)
    }

    /// Accepted steps taken before the endpoint slacks first vanish.
    pub fn accepted_before_zero_slack(&self) -> Option<usize> {
        let k = self.first_zero_slack_iteration()?;
        Some(
            self.result.history[..k]
                .iter()
                .filter(|r| r.accepted)
                .count(),
        )
    }

    pub fn final_time(&self) -> f64 {
        self.problem.horizon_time(&self.result.final_point)
    }
}

/// Builds, initializes and solves one crane instance.
pub fn solve_crane(cfg: &CraneConfig, params: &SolverParams) -> Result<CraneRun> {
    let problem = build_tocp(cfg)?;
    let w0 = feasible_initialization(&problem)?;
    let t = Instant::now();
    let result = outer::solve(&problem.nlp, &w0, params)?;
    Ok(CraneRun {
        problem,
        result,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Solves the configured crane problem; writes `outer.csv`, `inner.csv`, `trajectories.csv`
/// and `crane_summary.csv`.
pub fn run_crane(cfg: &RunConfig, out: &Path) -> Result<CraneRun> {
    cfg.validate()?;
    let run = solve_crane(&cfg.crane, &cfg.solver)?;
    let (res, lay) = (&run.result, &run.problem.layout);
    write_outer(out, "outer.csv", res, Some(lay.time()))?;

    let mut w = writer(out, "inner.csv", &INNER_HEADER)?;
    for (k, trace) in &res.inner_traces {
        for [l, h, ratio, kappa, dist] in inner_rows(trace) {
            w.write_record([
                k.to_string(),
                l,
                h,
                ratio,
                kappa,
                dist,
                trace.status.as_str().into(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(out, "trajectories.csv", &TRAJECTORY_HEADER)?;
    let mut outer_k =
        std::iter::once(0).chain(res.history.iter().filter(|r| r.accepted).map(|r| r.k + 1));
    for (i, wi) in res.iterates.iter().enumerate() {
        let k = outer_k.next().unwrap_or_default();
        for (stage, p) in lay.payload_path(wi).iter().enumerate() {
            w.write_record([
                i.to_string(),
                k.to_string(),
                stage.to_string(),
                float(p[0]),
                float(p[1]),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(
        out,
        "crane_summary.csv",
        &[
            "status",
            "outer_iterations",
            "accepted_steps",
            "zero_slack_iteration",
            "accepted_before_zero_slack",
            "final_time",
            "constraint_evaluations",
            "seconds",
        ],
    )?;
    w.write_record([
        res.status.as_str().to_string(),
        res.history.len().to_string(),
        res.accepted_steps().to_string(),
        opt_count(run.first_zero_slack_iteration()),
        opt_count(run.accepted_before_zero_slack()),
        float(run.final_time()),
        res.constraint_evaluations.to_string(),
        float(run.seconds),
    ])?;
    w.flush()?;
    info!(
        "crane: {} after {} iterations, T = {:.6}",
        res.status.as_str(),
        res.history.len(),
        run.final_time()
    );
    Ok(run)
}

// ---------------------------------------------------------------------------------------
// inner study

/// Default radii `1, 1/2, 1/4, 1/8, 1/16`.
pub const STUDY_RADII: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

#[derive(Debug, Clone)]
pub struct InnerStudyRow {
    pub radius: f64,
    pub trace: InnerTrace,
}

impl InnerStudyRow {
    pub fn converged(&self) -> bool {
        self.trace.status == InnerStatus::Converged
    }

    pub fn final_ratio(&self) -> Option<f64> {
        self.trace.iterates.last().map(|it| it.projection_ratio)
    }
}

/// Feasibility iterations from the first trust-region step of the crane problem, once per
/// radius. Writes `inner_study.csv` and `inner_study_summary.csv`.
pub fn run_inner_study(cfg: &RunConfig, radii: &[f64], out: &Path) -> Result<Vec<InnerStudyRow>> {
    cfg.validate()?;
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(FslpError::Config(format!(
            "radii must be positive, got {radii:?}"
        )));
    }
    if radii.windows(2).any(|r| r[1] >= r[0]) {
        return Err(FslpError::Config(format!(
            "radii must be descending, got {radii:?}"
        )));
    }
    let problem = build_tocp(&cfg.crane)?;
    let p = &problem.nlp;
    let w0 = feasible_initialization(&problem)?;
    let lin = p.linearize(&w0)?;
    let params = &cfg.solver;

    let mut rows = Vec::new();
    for &radius in radii {
        let tr = build_trust_region_lp(&lin, p, radius);
        let sol = solve_lp_warm(&tr.lp, &params.lp, None)?;
        if sol.status != LpStatus::Optimal {
            return Err(FslpError::Internal(format!(
                "trust-region LP at radius {radius} returned {:?}",
                sol.status
            )));
        }
        let outcome = run_inner(
            p,
            &lin,
            &sol.primal,
            radius,
            &params.inner,
            &params.lp,
            sol.basis.as_ref(),
        )?;
        rows.push(InnerStudyRow {
            radius,
            trace: outcome.trace,
        });
    }

    let mut w = writer(out, "inner_study.csv", &INNER_STUDY_HEADER)?;
    for row in &rows {
        for [l, h, ratio, kappa, dist] in inner_rows(&row.trace) {
            w.write_record([
                float(row.radius),
                l,
                h,
                ratio,
                kappa,
                dist,
                row.trace.status.as_str().into(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = writer(out, "inner_study_summary.csv", &INNER_STUDY_SUMMARY_HEADER)?;
    for row in &rows {
        w.write_record([
            float(row.radius),
            row.trace.status.as_str().to_string(),
            row.trace.plp_solves.to_string(),
            opt_float(row.trace.iterates.last().map(|it| it.infeasibility)),
            opt_float(row.final_ratio()),
            opt_float(row.trace.mean_kappa()),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

// ---------------------------------------------------------------------------------------
// benchmark

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance: usize,
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Solver status, or `error` when the instance could not be solved.
    pub status: String,
    pub outer_iterations: usize,
    pub accepted_steps: usize,
    pub constraint_evaluations: usize,
    pub zero_slack_iteration: Option<usize>,
    pub final_time: Option<f64>,
}

impl BenchRow {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal.as_str()
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.instance.to_string(),
            float(self.start[0]),
            float(self.start[1]),
            float(self.end[0]),
            float(self.end[1]),
            self.status.clone(),
            self.outer_iterations.to_string(),
            self.accepted_steps.to_string(),
            self.constraint_evaluations.to_string(),
            opt_count(self.zero_slack_iteration),
            opt_float(self.final_time),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary_path: PathBuf,
}

impl BenchReport {
    pub fn optimal_fraction(&self) -> f64 {
        let ok = self.rows.iter().filter(|r| r.is_optimal()).count();
        ok as f64 / self.rows.len().max(1) as f64
    }

    /// Exit status: nonzero only when more than a tenth of the instances failed.
    pub fn exit_code(&self) -> i32 {
        if self.optimal_fraction() >= 0.9 {
            0
        } else {
            2
        }
    }
}

/// Solves `cfg.bench.instances` perturbed crane problems on `jobs` worker threads. Writes
/// `bench_summary.csv` and one outer log per instance under `instances/`.
pub fn run_bench(cfg: &RunConfig, jobs: usize, out: &Path) -> Result<BenchReport> {
    cfg.validate()?;
    let configs = perturb_problems(
        &cfg.crane,
        cfg.bench.seed,
        cfg.bench.instances,
        cfg.bench.radius,
    )?;
    let inst_dir = out.join("instances");
    std::fs::create_dir_all(&inst_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| FslpError::Config(format!("cannot start worker pool: {e}")))?;

    let solve_one = |(i, c): (usize, &CraneConfig)| -> Result<BenchRow> {
        let mut row = BenchRow {
            instance: i,
            start: c.start_payload,
            end: c.end_payload,
            status: "error".into(),
            outer_iterations: 0,
            accepted_steps: 0,
            constraint_evaluations: 0,
            zero_slack_iteration: None,
            final_time: None,
        };
        match solve_crane(c, &cfg.solver) {
            Ok(run) => {
                let res = &run.result;
                write_outer(
                    &inst_dir,
                    &format!("instance_{i:04}.csv"),
                    res,
                    Some(run.problem.layout.time()),
                )?;
                row.status = res.status.as_str().to_string();
                row.outer_iterations = res.history.len();
                row.accepted_steps = res.accepted_steps();
                row.constraint_evaluations = res.constraint_evaluations;
                row.zero_slack_iteration = run.first_zero_slack_iteration();
                row.final_time = Some(run.final_time());
            }
            Err(e) => log::warn!("bench instance {i}: {e}"),
        }
        Ok(row)
    };
    let rows: Vec<BenchRow> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(solve_one)
            .collect::<Result<Vec<_>>>()
    })?;

    let mut w = writer(out, "bench_summary.csv", &BENCH_HEADER)?;
    for row in &rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    let report = BenchReport {
        rows,
        summary_path: out.join("bench_summary.csv"),
    };
    info!(
        "bench: {:.0}% of {} instances optimal",
        100.0 * report.optimal_fraction(),
        report.rows.len()
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superlinear_tail_detection() {
        assert!(has_superlinear_tail(&[1.0, 1e-1, 5e-3, 1e-5]));
        assert!(!has_superlinear_tail(&[1.0, 1e-1, 5e-3, 2.5e-3, 1.2e-3]));
        assert!(!has_superlinear_tail(&[]));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&FslpError::Config("x".into())), 3);
        assert_eq!(exit_code(&FslpError::Initialization("x".into())), 4);
        assert_eq!(exit_code(&FslpError::InfeasibleStart(1.0)), 4);
        assert_eq!(status_code(SolveStatus::Optimal), 0);
        assert_eq!(status_code(SolveStatus::MaxIterations), 2);
    }
}
