//! The `fslp` binary: exit codes, CSV layouts and lossless float output.

use std::path::Path;
use std::process::{Command, Output};

use fslp::experiments::{
    float, BENCH_HEADER, ILLUSTRATIVE_HEADER, INNER_HEADER, INNER_STUDY_HEADER,
    INNER_STUDY_SUMMARY_HEADER, OUTER_HEADER, TRAJECTORY_HEADER,
};
use tempfile::TempDir;

fn fslp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fslp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &TempDir, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.path().to_str().unwrap()]);
    fslp(&all)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr =
        csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn illustrative_writes_lossless_csv() {
    let dir = TempDir::new().unwrap();
    let out = run_in(&dir, &["illustrative"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("illustrative.csv"));
    assert_eq!(header, ILLUSTRATIVE_HEADER);
    assert!(rows.iter().any(|r| r[0] == float(0.06)) && rows.iter().any(|r| r[0] == float(-0.06)));
    for row in &rows {
        for cell in [&row[0], &row[2], &row[3], &row[4], &row[5]] {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(&float(v), cell, "not a round trip");
        }
    }
    let last = rows.iter().rev().find(|r| r[0] == float(0.06)).unwrap();
    assert!(last[4].parse::<f64>().unwrap() <= 1e-6);
}

#[test]
fn crane_run_logs_feasible_iterates() {
    let dir = TempDir::new().unwrap();
    let out = run_in(&dir, &["crane"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("status=optimal"));
    let (header, rows) = read_csv(&dir.path().join("outer.csv"));
    assert_eq!(header, OUTER_HEADER);
    for row in &rows {
        assert!(
            row[2].parse::<f64>().unwrap() <= 1e-7,
            "iterate {} infeasible",
            row[0]
        );
    }
    assert_eq!(read_csv(&dir.path().join("inner.csv")).0, INNER_HEADER);
    let (header, traj) = read_csv(&dir.path().join("trajectories.csv"));
    assert_eq!(header, TRAJECTORY_HEADER);
    // 21 payload positions per stored iterate
    assert_eq!(traj.len() % 21, 0);
    assert!(dir.path().join("crane_summary.csv").exists());
}

#[test]
fn inner_study_writes_both_tables() {
    let dir = TempDir::new().unwrap();
    let out = run_in(&dir, &["inner-study", "--radii", "0.25,0.125"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        read_csv(&dir.path().join("inner_study.csv")).0,
        INNER_STUDY_HEADER
    );
    let (header, rows) = read_csv(&dir.path().join("inner_study_summary.csv"));
    assert_eq!(header, INNER_STUDY_SUMMARY_HEADER);
    assert_eq!(rows.len(), 2);
}

#[test]
fn bench_is_reproducible_per_seed() {
    let summary = |seed: &str| {
        let dir = TempDir::new().unwrap();
        let out = run_in(&dir, &["bench", "--seed", seed, "--set", "instances=4"]);
        assert!(matches!(code(&out), 0 | 2));
        let text = std::fs::read_to_string(dir.path().join("bench_summary.csv")).unwrap();
        let (header, rows) = read_csv(&dir.path().join("bench_summary.csv"));
        assert_eq!(header, BENCH_HEADER);
        assert_eq!(rows.len(), 4);
        for row in rows.iter().filter(|r| r[5] != "error") {
            let log = dir.path().join("instances").join(format!(
                "instance_{:04}.csv",
                row[0].parse::<usize>().unwrap()
            ));
            assert!(log.exists(), "{}", log.display());
        }
        text
    };
    let a = summary("5");
    assert_eq!(a, summary("5"));
    assert_ne!(a, summary("6"));
}

#[test]
fn non_optimal_termination_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = run_in(&dir, &["crane", "--set", "max_outer_iterations=3"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("status=max_iterations"));
}

#[test]
fn configuration_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let bad_key = dir.path().join("bad.toml");
    std::fs::write(&bad_key, "[solver]\nkapa_watch = 0.2\n").unwrap();
    let bad_key = bad_key.to_str().unwrap();
    for args in [
        vec!["crane", "--set", "kappa_watch=2"],
        vec!["crane", "--set", "no_such_key=1"],
        vec!["crane", "--config", "/nonexistent/config.toml"],
        vec!["crane", "--config", bad_key],
        vec!["bench", "--set", "instances=5"],
        vec!["frobnicate"],
        vec!["crane", "--bogus-flag"],
    ] {
        let out = run_in(&dir, &args);
        assert_eq!(
            code(&out),
            3,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/crane_default.toml");
    let cfg = fslp::experiments::RunConfig::load(&path).unwrap();
    assert_eq!(cfg, fslp::experiments::RunConfig::default());
}

#[test]
fn infeasible_initialization_exits_4() {
    let dir = TempDir::new().unwrap();
    // a fast cart drags the payload through the obstacle
    let out = run_in(&dir, &["crane", "--set", "u_init=[1.0, 0.0]"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_0() {
    let out = fslp(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("inner-study"));
}
