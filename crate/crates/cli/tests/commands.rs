//! End-to-end command tests against the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_escape-atlas"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("escape-atlas-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn selftest_exits_zero() {
    let status = bin().arg("selftest").status().unwrap();
    assert!(status.success());
}

#[test]
fn unknown_config_key_fails_with_key_name() {
    let dir = tmp_dir("badkey");
    let cfg = write_cfg(&dir, "model.f = 0.01\nmodel.omegaa = 0.9\n");
    let out = bin()
        .args(["basin", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("model.omegaa"), "stderr: {stderr}");
}

#[test]
fn basin_artifacts_reparse_and_verify() {
    let dir = tmp_dir("basin");
    let cfg = write_cfg(
        &dir,
        "model.f = 0.01\nmodel.omega = 0.9\nmodel.psi = 3.141592653589793\nmodel.xi_max = 0.18\nrun.resolution = 24\nrun.horizon_ec = 40\n",
    );
    let out_dir = dir.join("out");
    let status = bin()
        .args(["basin", "--verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    // both CSVs re-parse through the library readers
    let boundary = fs::File::open(out_dir.join("boundary.csv")).unwrap();
    let rows = escape_atlas_core::io::read_boundary_csv(std::io::BufReader::new(boundary)).unwrap();
    assert!(rows.len() > 500);
    assert!(rows.iter().all(|r| r.3 <= 0.18 + 1e-9), "xi above the cut");
    let grid = fs::File::open(out_dir.join("grid.csv")).unwrap();
    let cells = escape_atlas_core::io::read_grid_csv(std::io::BufReader::new(grid)).unwrap();
    assert_eq!(cells.len(), 24 * 24);
    assert!(out_dir.join("basin.svg").exists());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn seeded_rerun_is_bit_identical() {
    let dir = tmp_dir("strobe");
    let cfg = write_cfg(
        &dir,
        "model.f = 0.0876\nmodel.omega = 0.99\nmodel.psi = 3.141592653589793\nmodel.xi_max = 0.24\nstrobe.n_ics = 6\nstrobe.n_iters = 30\nrun.seed = 7\n",
    );
    let run = |out: &Path, workers: &str| {
        let status = bin()
            .args(["strobe", "--workers", workers, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(out.join("strobe.csv")).unwrap()
    };
    let a = run(&dir.join("out_a"), "1");
    let b = run(&dir.join("out_b"), "2");
    assert_eq!(a, b, "output must not depend on the worker count");
    let c = run(&dir.join("out_c"), "2");
    assert_eq!(b, c, "seeded rerun must produce identical files");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn fcr_curve_single_point_sweep() {
    let dir = tmp_dir("fcr");
    let cfg = write_cfg(
        &dir,
        "model.psi = 3.141592653589793\nmodel.xi_max = 0.242\nic.gamma = 3.141592653589793\nic.xi = 0.0\nsweep.omega = 1.0:1.0:1\n",
    );
    let out_dir = dir.join("out");
    let status = bin()
        .args(["fcr-curve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let f = fs::File::open(out_dir.join("fcr_analytic.csv")).unwrap();
    let rows = escape_atlas_core::io::read_fcr_csv(std::io::BufReader::new(f)).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].0, 1.0);
    assert!(rows[0].1 > 0.0);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn env_var_out_dir_fallback() {
    let dir = tmp_dir("envout");
    let cfg = write_cfg(
        &dir,
        "model.psi = 0.0\nmodel.xi_max = 0.2\nsweep.omega = 1.1:1.1:1\nic.q = 0.0\nic.p = 0.0\n",
    );
    let out_dir = dir.join("from_env");
    let status = bin()
        .args(["fcr-curve", "--config"])
        .arg(&cfg)
        .env("ESCAPE_ATLAS_OUT", &out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("fcr_analytic.csv").exists());
    let _ = fs::remove_dir_all(&dir);
}
