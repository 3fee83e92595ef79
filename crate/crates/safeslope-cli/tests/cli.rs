//! End-to-end tests of the `safeslope` binary: subcommands, overrides, exit
//! codes, and output files.

use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safeslope"))
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.cfg");
    std::fs::write(
        &path,
        "# small instance for smoke tests\n\
         grid_resolution = 8\n\
         iterations = 4\n\
         trials = 2\n\
         seed = 11\n\
         analysis_horizons = 3\n\
         tstar_cap = 50000\n",
    )
    .unwrap();
    path
}

#[test]
fn run_writes_trial_and_aggregate_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("results");
    let status = binary()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("trial_0.csv").exists());
    assert!(out.join("trial_1.csv").exists());
    assert!(out.join("aggregate.csv").exists());

    let aggregate = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let data_rows = aggregate.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, 1 + 4); // header + one row per iteration
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = binary()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["trial_0.csv", "trial_1.csv", "aggregate.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn surface_emits_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("results");
    let status = binary()
        .args(["surface", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let surface = std::fs::read_to_string(out.join("surface.csv")).unwrap();
    let data_rows = surface.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, 1 + 64); // header + 8^2 grid points

    // Columns: point, x1, x2, f, f_low.
    let header = surface.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "point,x1,x2,f,f_low");
}

#[test]
fn analyze_prints_bounds_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("results");
    let output = binary()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("gamma_multi_T3"));
    assert!(stdout.contains("c1_single"));
    assert!(out.join("analysis.csv").exists());
}

#[test]
fn verify_quick_passes() {
    let output = binary().args(["verify", "--quick", "--seed", "5"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("single_fidelity_vs_dense_inverse"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn cli_overrides_take_effect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("results");
    let status = binary()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--trials", "1", "--iters", "2", "--algorithm", "safeucb", "--fidelity", "single"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("trial_0.csv").exists());
    assert!(!out.join("trial_1.csv").exists());
    let aggregate = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(aggregate.contains("# cell = safeucb_single"));
}

#[test]
fn bad_inputs_produce_nonzero_exit_and_diagnostics() {
    // Unreadable config path.
    let output = binary()
        .args(["run", "--config", "/no/such/file.cfg", "--out", "/tmp/x"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(!output.stderr.is_empty());

    // Invalid config value.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "delta_f = 2.0\n").unwrap();
    let output = binary()
        .args(["run", "--config"])
        .arg(&bad)
        .args(["--out", "/tmp/x"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("delta_f"));

    // Unknown flag.
    let output = binary().args(["run", "--no-such-flag"]).output().unwrap();
    assert!(!output.status.success());
}
