use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bethe-tau"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("BETHE_TAU_OUT")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const CHAIN: &[&str] = &["--theta=0.4,-0.9", "--L", "2", "--count", "40"];

const STEPS: [&str; 9] = [
    "spectrum",
    "bethe-solve",
    "verify-tq",
    "build-master",
    "verify-hirota",
    "zeros-flow",
    "rs-check",
    "inverse-velocities",
    "report",
];

fn pipeline(dir: &Path) -> Vec<i32> {
    STEPS
        .iter()
        .map(|step| {
            let mut args = vec![*step];
            args.extend_from_slice(CHAIN);
            let o = run(dir, &args);
            assert!(code(&o) != 2, "{step}: {}", stderr(&o));
            code(&o)
        })
        .collect()
}

#[test]
fn report_on_empty_workspace_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["report"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bethe-tau spectrum"), "{}", stderr(&o));
}

#[test]
fn spectrum_of_four_sites() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--L", "4", "--J", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    let doc = json(&dir.path().join("out/spectrum.json"));
    assert!((doc["min_energy"].as_f64().unwrap() + 8.0).abs() < 1e-10);
    let sectors: Vec<usize> = doc["sectors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["energies"].as_array().unwrap().len())
        .collect();
    assert_eq!(sectors, vec![1, 4, 6, 4, 1]);
}

#[test]
fn constant_fixture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-hirota", "--fixture", "constant"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(&dir.path().join("out/hirota_fixture_constant.json"));
    assert!(doc["report"]["max_residual"].as_f64().unwrap() < 1e-14);
}

#[test]
fn downstream_commands_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["build-master", "--L", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bethe-tau bethe-solve"), "{}", stderr(&o));
    assert_eq!(code(&run(dir.path(), &["spectrum", "--L", "2"])), 0);
    assert_eq!(code(&run(dir.path(), &["bethe-solve", "--L", "2"])), 0);
    let o = run(dir.path(), &["verify-tq", "--L", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("rerun `bethe-tau bethe-solve`"), "{}", stderr(&o));
}

#[test]
fn configuration_errors_carry_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectrum", "--L", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("chain.L"));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"rs": {"t1_range": [0.0, "x"]}}"#).unwrap();
    let o = run(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("rs.t1_range"), "{}", stderr(&o));
    let o = run(dir.path(), &["zeros-flow", "--L", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("chain.theta"));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"chain": {"L": 3}}"#).unwrap();
    let o = run(dir.path(), &["spectrum", "--L", "5", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn pipeline_is_reproducible_and_reports_every_criterion() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let codes = pipeline(a.path());
    // only the Hirota step carries the K = 0 clause that cannot hold
    assert_eq!(codes, vec![0, 0, 0, 0, 1, 0, 0, 0, 1]);
    pipeline(b.path());
    let mut compared = 0;
    for entry in std::fs::read_dir(a.path().join("out")).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().contains("timings") {
            continue;
        }
        let x = std::fs::read(a.path().join("out").join(&name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
        compared += 1;
    }
    assert!(compared > 20);
    let report = json(&a.path().join("out/report.json"));
    let status: Vec<&str> = report["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["status"].as_str().unwrap())
        .collect();
    assert_eq!(status.len(), 10);
    assert_eq!(status[0], "not_covered");
    assert_eq!(status[3], "fail");
    assert!(
        status.iter().enumerate().all(|(k, s)| k == 0 || k == 3 || *s == "pass"),
        "{status:?}"
    );
    let manifest = json(&a.path().join("out/spectrum.manifest.json"));
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest.get("seconds").is_none());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_bethe-tau"))
        .args(["spectrum", "--L", "2", "--out"])
        .arg(dir.path().join("flag-out"))
        .env("BETHE_TAU_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("spectrum.csv").exists());
    assert!(!dir.path().join("flag-out").exists());
}
