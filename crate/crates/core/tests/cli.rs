//! End-to-end runs of the `eplab` binary against the shipped scenarios.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn eplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, sub: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    eplab(&args)
}

#[test]
fn usage_errors_exit_1() {
    let out = eplab(&["sweep"]);
    assert_eq!(out.status.code(), Some(1));
    let out = eplab(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(1));
    let out = eplab(&["sweep", "--config", "/nonexistent.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn help_exits_0() {
    let out = eplab(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["spectrum", "sweep", "find-ep", "encircle", "equilibrium"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn spectrum_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "spectrum", &scenario("ep_fixture.json"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ep_fixture_spectrum.csv")).unwrap();
    assert!(csv.starts_with("index,a,omega0_re,omega0_im,E_0,Gamma_0,r_0,H_0"));
    // config echo sits next to the outputs
    assert!(dir.path().join("ep_fixture_config.json").exists());
}

#[test]
fn sweep_writes_all_formats_and_is_schedule_independent() {
    let cfg = scenario("equilibrium.json");
    let d1 = tempfile::tempdir().unwrap();
    let out = run_in(d1.path(), "sweep", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let parallel = std::fs::read(d1.path().join("equilibrium_sweep.csv")).unwrap();
    let lines = String::from_utf8(parallel.clone()).unwrap().lines().count();
    assert_eq!(lines, 202); // header + samples
    for f in ["equilibrium_sweep.json", "equilibrium_energies.dat", "equilibrium_scalars.dat"] {
        assert!(d1.path().join(f).exists(), "missing {f}");
    }

    let d2 = tempfile::tempdir().unwrap();
    let out = run_in(d2.path(), "sweep", &cfg, &["--serial"]);
    assert_eq!(out.status.code(), Some(0));
    let serial = std::fs::read(d2.path().join("equilibrium_sweep.csv")).unwrap();
    assert_eq!(parallel, serial, "parallel and serial sweeps must match byte for byte");
}

#[test]
fn override_changes_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "sweep", &scenario("equilibrium.json"),
        &["--override", "sweep.samples=17"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("equilibrium_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 18);
}

#[test]
fn equilibrium_found_on_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "equilibrium", &scenario("equilibrium.json"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("equilibrium at sample"), "{text}");
    assert!(dir.path().join("equilibrium_equilibrium.json").exists());
}

#[test]
fn equilibrium_absent_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "equilibrium", &scenario("equilibrium.json"),
        &["--override", "sweep.path.points.1.a=0.2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no equilibrium"));
}

#[test]
fn find_ep_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "find-ep", &scenario("ep_fixture.json"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ep_fixture_ep.json")).unwrap())
            .unwrap();
    assert_eq!(report["verified"], serde_json::Value::Bool(true));
    let x = report["location"]["x"].as_array().unwrap();
    assert!(x[0].as_f64().unwrap().abs() < 1e-6);
    assert!((x[1].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn encircle_reports_the_swap() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "encircle", &scenario("ep_fixture.json"),
        &["--override", "ep.seed=[0.0,1.0]"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[1, 0]"));
    let csv = std::fs::read_to_string(dir.path().join("ep_fixture_loop.csv")).unwrap();
    assert!(csv.starts_with("step,E_0_re,E_0_im,E_1_re,E_1_im"));
    assert_eq!(csv.lines().count(), 402); // header + steps + closing point
}

#[test]
fn unknown_config_field_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(scenario("equilibrium.json")).unwrap(),
    )
    .unwrap();
    doc["system"]["typo_field"] = serde_json::json!(1);
    std::fs::write(&bad, doc.to_string()).unwrap();
    let out = eplab(&["sweep", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo_field"));
}
