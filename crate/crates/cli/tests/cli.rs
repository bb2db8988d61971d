//! End-to-end smoke tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};
use std::{fs, str};

use tempfile::tempdir;
use uwbeam_core::harness::ExperimentConfig;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwbeam"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Short frame so a full link run stays in smoke-test territory.
fn small_config(n_d: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::space();
    c.protocol.n_d = n_d;
    c
}

#[test]
fn design_weights_writes_all_in_band_rows() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let stdout = run_ok(&["design-weights", "--angle-deg", "17.3", "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("855 in-band bins x 24 elements"), "stdout: {stdout}");

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin,frequency_hz,element,re,im"));
    assert_eq!(lines.count(), 855 * 24);
}

#[test]
fn beampattern_peaks_at_the_design_angle() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("p.csv");
    run_ok(&[
        "beampattern",
        "--angle-deg",
        "8",
        "--null-deg",
        "-8.75",
        "--l",
        "1024",
        "--out",
        out.to_str().unwrap(),
    ]);

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("angle_deg,amplitude,gain_db"));
    let mut peak = (0.0f64, 0.0f64);
    let mut null_amp = f64::INFINITY;
    for line in lines {
        let mut cells = line.split(',');
        let angle: f64 = cells.next().unwrap().parse().unwrap();
        let amp: f64 = cells.next().unwrap().parse().unwrap();
        if amp > peak.1 {
            peak = (angle, amp);
        }
        if (angle + 8.75).abs() < 1e-9 {
            null_amp = amp;
        }
    }
    assert!((peak.0 - 8.0).abs() < 0.3, "peak at {} deg", peak.0);
    assert!((peak.1 - 24f64.sqrt()).abs() < 0.1, "peak amplitude {}", peak.1);
    // the null direction sits on the quarter-degree grid, so the response
    // there must vanish outright
    assert!(null_amp < 1e-9, "null amplitude {null_amp}");
}

#[test]
fn sim_runs_a_short_link_from_a_config_file() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(600));
    let out = dir.path().join("run");
    let stdout = run_ok(&["sim", "--config", &config, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("bit errors"), "stdout: {stdout}");

    for file in ["manifest.json", "metrics.csv", "constellation.csv", "pll_trace.csv"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["config"]["protocol"]["n_d"], 600);
}

#[test]
fn mc_realization_override_shapes_the_cdf() {
    let dir = tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(400));
    let out = dir.path().join("run");
    run_ok(&[
        "mc",
        "--config",
        &config,
        "--seed",
        "7",
        "--realizations",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);

    let cdf = fs::read_to_string(out.join("mse_cdf.csv")).unwrap();
    let mut lines = cdf.lines();
    assert_eq!(lines.next(), Some("mse_db,cdf"));
    assert_eq!(lines.count(), 3);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["config"]["protocol"]["realizations"], 3);
}

#[test]
fn two_user_writes_per_user_artifacts() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("run");
    let stdout = run_ok(&["two-user", "--n-d", "700", "--plain", "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("user 1:") && stdout.contains("user 2:"), "stdout: {stdout}");

    for file in [
        "two_user_metrics.csv",
        "constellation_user1.csv",
        "constellation_user2.csv",
        "pll_trace_user1.csv",
        "pll_trace_user2.csv",
    ] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
}

#[test]
fn angle_map_estimates_the_principal_arrival() {
    let dir = tempdir().unwrap();
    let mut c = ExperimentConfig::space();
    // a short probe sequence keeps the uplink correlation cheap
    c.beam.probe_degree = Some(7);
    let config = write_config(dir.path(), &c);
    let out = dir.path().join("run");
    let stdout = run_ok(&["angle-map", "--config", &config, "--out", out.to_str().unwrap()]);

    let line = stdout.lines().find(|l| l.starts_with("estimated angle")).expect("angle line");
    let deg: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(deg.abs() < 1.0, "estimated {deg} deg for a broadside arrival");

    let map = fs::read_to_string(out.join("angle_map.csv")).unwrap();
    assert_eq!(map.lines().next(), Some("delay_s,angle_deg,power_db"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempdir().unwrap();
    let mut value = serde_json::to_value(small_config(400)).unwrap();
    value["protocol"]["bogus"] = serde_json::json!(1);
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();

    let out = run(&["sim", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown field"), "stderr: {stderr}");
}
