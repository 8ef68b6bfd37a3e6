use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_anisodiff"));
    c.env_remove("ANISODIFF_THREADS");
    c
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stationary_config_passes_with_zero_gradient_term() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run"], &bundled("stationary.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["schema"], "anisodiff-report/1");
    assert_eq!(r["verdict"], "pass");
    let energy = r["probes"].as_array().unwrap().iter().find(|p| p["kind"] == "energy").unwrap();
    assert_eq!(energy["detail"]["gradient_term"].as_f64(), Some(0.0));
    assert_eq!(r["simulation"]["error_vs_exact"]["max_linf"].as_f64(), Some(0.0));
    assert!(dir.path().join("fields/final.csv").exists());
    assert!(dir.path().join("fields/final.bin").exists());
}

#[test]
fn heat_config_reports_error_against_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate"], &bundled("heat.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.last(), Some(&"error_vs_exact"));
    let sim: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(sim[0], "simulation");
    let err: f64 = sim.last().unwrap().parse().unwrap();
    assert!(err > 0.0 && err < 1e-3, "error {err}");
}

#[test]
fn malformed_config_exits_2_naming_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled("heat.toml")).unwrap().replace("lambda = 1.0", "lambda = \"one\"");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line") && e.contains("lambda"), "{e}");
}

#[test]
fn unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        std::fs::read_to_string(bundled("heat.toml")).unwrap().replace("t_end = 0.1", "t_end = 0.1\nt_ned = 0.2");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_ned"));
}

#[test]
fn cylinder_outside_the_domain_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled("subquadratic.toml")).unwrap().replace("t_end = 0.06", "t_end = 0.05");
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn verification_without_constants_exits_3_and_asks_for_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-energy"], &bundled("subquadratic.toml"), dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("calibrate"), "{}", stderr(&o));
}

#[test]
fn calibrate_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("subquadratic.toml");
    let o = run(&["calibrate"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let k: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
    assert_eq!(k["schema"], "anisodiff-constants/1");
    assert!(k["energy_constant"].as_f64().unwrap() > 0.0);
    assert!(k["supbound_constant"].as_f64().is_some());

    for cmd in ["verify-energy", "degiorgi-report"] {
        let o = run(&[cmd], &cfg, dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        let r = report(dir.path());
        assert_eq!(r["command"], cmd);
        assert!(r["probes"].as_array().unwrap().iter().all(|p| p["verdict"] == "pass"));
    }
}

#[test]
fn calibrate_then_critical_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("critical_mass.toml");
    let o = run(&["critical-mass"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(run(&["calibrate"], &cfg, dir.path()).status.code(), Some(0));
    let o = run(&["critical-mass"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["probes"][0]["detail"]["verdict"], "holds");
}

#[test]
fn too_small_energy_constant_fails_the_probe() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("constants.json"),
        r#"{"schema":"anisodiff-constants/1","energy_constant":1e-9,"supbound_constant":null,"gamma":null}"#,
    )
    .unwrap();
    let o = run(&["verify-energy"], &bundled("subquadratic.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(dir.path())["verdict"], "fail");
}

#[test]
fn exhausted_step_budget_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled("heat.toml"))
        .unwrap()
        .replace("boundary = \"dirichlet-from-initial\"", "boundary = \"dirichlet-from-initial\"\nmax_steps = 3");
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn command_without_matching_probes_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify-embedding"], &bundled("heat.toml"), dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = bundled("subquadratic.toml");
    let o = bin()
        .env("ANISODIFF_THREADS", "1")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(a.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = bin()
        .env("ANISODIFF_THREADS", "3")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["report.json", "summary.csv", "fields/final.bin", "fields/final.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify-cutoff", "--seed", "99", "--config"])
        .arg(bundled("stationary.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path())["seed"], 99);
}

#[test]
fn invalid_thread_count_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("ANISODIFF_THREADS", "many")
        .args(["simulate", "--config"])
        .arg(bundled("heat.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}
