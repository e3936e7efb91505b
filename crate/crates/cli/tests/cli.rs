use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dchoice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} exited {:?}\n{}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn f(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("{key} missing in {v}"))
}

fn out(dir: &TempDir, sub: &str) -> String {
    dir.path().join(sub).to_str().unwrap().to_owned()
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn predict_presets() {
    let dir = TempDir::new().unwrap();
    run_ok(&[
        "predict",
        "--preset",
        "witness-matrix",
        "--out",
        &out(&dir, "w"),
    ]);
    let r = json(dir.path().join("w/report.json"));
    assert!((f(&r, "det_abs") - 1.0).abs() < 1e-12);

    let o = run_ok(&[
        "predict",
        "--preset",
        "dimension-witness",
        "--out",
        &out(&dir, "i"),
    ]);
    let r = json(dir.path().join("i/report.json"));
    assert!((f(&r, "i_dw") - 3.8284).abs() < 1e-4);
    assert!((f(&r, "r") - 0.2071).abs() < 1e-4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("I_DW"));
    for name in [
        "scenario.json",
        "table.csv",
        "report.csv",
        "fig_conditional.csv",
        "fig_correlators.csv",
    ] {
        assert!(dir.path().join("i").join(name).exists(), "{name} missing");
    }
    let table = std::fs::read_to_string(dir.path().join("i/table.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("i,j,p_e,p_d,p_none"));
    assert_eq!(table.lines().count(), 7);
}

#[test]
fn predict_pure_noise_gives_zero() {
    let dir = TempDir::new().unwrap();
    for (name, alphas) in [("w", "[0.0, 1.0, -0.5, 0.5]"), ("i", "[0.25, 0.75, -0.5]")] {
        let cfg = write_config(
            &dir,
            &format!("{name}.json"),
            &format!(
                r#"{{"scenario": {{"alphas_pi": {alphas}, "betas_pi": [0.5, 0.0], "visibility": 0.0, "fair_sampling": true}}}}"#
            ),
        );
        run_ok(&["predict", "--config", &cfg, "--out", &out(&dir, name)]);
    }
    let w = json(dir.path().join("w/report.json"));
    let i = json(dir.path().join("i/report.json"));
    assert!(f(&w, "det_abs").abs() < 1e-12);
    assert!(f(&i, "i_dw").abs() < 1e-12);
    assert_eq!(f(&i, "r"), 0.0);
}

#[test]
fn simulate_ideal_dimension_witness() {
    let dir = TempDir::new().unwrap();
    run_ok(&[
        "simulate",
        "--preset",
        "dimension-witness",
        "--fair-sampling",
        "true",
        "--trials",
        "100000",
        "--resamples",
        "1000",
        "--seed",
        "5",
        "--out",
        &out(&dir, "s"),
    ]);
    let r = json(dir.path().join("s/report.json"));
    let se = f(&r["uncertainties"], "i_dw_se");
    assert!(se > 0.0);
    assert!((f(&r, "i_dw") - (1.0 + 2.0 * 2f64.sqrt())).abs() <= 3.0 * se);
}

#[test]
fn simulate_lossy_witness_matrix_without_fair_sampling() {
    let dir = TempDir::new().unwrap();
    let o = run_ok(&[
        "simulate",
        "--config",
        fixture("witness_matrix.json").to_str().unwrap(),
        "--out",
        &out(&dir, "s"),
    ]);
    let r = json(dir.path().join("s/report.json"));
    let det = f(&r, "det_abs");
    let se = f(&r["uncertainties"], "det_abs_se");
    let expected = 0.882f64.powi(2) * 0.186f64.powi(2);
    assert!(
        (det - expected).abs() <= 3.0 * se,
        "{det} ± {se} vs {expected}"
    );
    assert!(f(&r, "sigma_det") > 10.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("|det W|"));
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = |sub: &str| {
        vec![
            "simulate".to_owned(),
            "--preset".into(),
            "witness-matrix".into(),
            "--trials".into(),
            "20000".into(),
            "--resamples".into(),
            "200".into(),
            "--seed".into(),
            "99".into(),
            "--out".into(),
            out(&dir, sub),
        ]
    };
    for sub in ["a", "b"] {
        let a = args(sub);
        run_ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for name in ["report.json", "counts.csv", "estimated_table.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn report_reproduces_simulate() {
    let dir = TempDir::new().unwrap();
    run_ok(&[
        "simulate",
        "--preset",
        "dimension-witness",
        "--trials",
        "5000",
        "--resamples",
        "300",
        "--seed",
        "4",
        "--out",
        &out(&dir, "s"),
    ]);
    let counts = dir.path().join("s/counts.csv");
    run_ok(&[
        "report",
        "--counts",
        counts.to_str().unwrap(),
        "--seed",
        "4",
        "--resamples",
        "300",
        "--out",
        &out(&dir, "r"),
    ]);
    assert_eq!(
        json(dir.path().join("s/report.json")),
        json(dir.path().join("r/report.json"))
    );
}

#[test]
fn report_rejects_bad_counts() {
    let dir = TempDir::new().unwrap();
    let p = write_config(
        &dir,
        "counts.csv",
        "i,j,n_e,n_d,n_none\n0,0,1,2,3\n0,0,1,2,3\n",
    );
    let o = run(&["report", "--counts", &p, "--out", &out(&dir, "r")]);
    assert!(!o.status.success());
}

#[test]
fn bounds_idw_and_det() {
    let dir = TempDir::new().unwrap();
    run_ok(&[
        "bounds",
        "--dim",
        "2",
        "--witness",
        "idw",
        "--out",
        &out(&dir, "i2"),
    ]);
    let b = json(dir.path().join("i2/bounds.json"));
    assert_eq!(f(&b, "value"), 3.0);
    assert_eq!(b["strategies_checked"], 128);

    run_ok(&[
        "bounds",
        "--dim",
        "3",
        "--witness",
        "idw",
        "--out",
        &out(&dir, "i3"),
    ]);
    assert_eq!(f(&json(dir.path().join("i3/bounds.json")), "value"), 5.0);

    run_ok(&[
        "bounds",
        "--dim",
        "2",
        "--witness",
        "det",
        "--restarts",
        "2000",
        "--seed",
        "1",
        "--out",
        &out(&dir, "d"),
    ]);
    let b = json(dir.path().join("d/bounds.json"));
    assert_eq!(f(&b, "vertex_max"), 0.0);
    assert!(f(&b, "mixture_max") <= 1e-9);
    assert_eq!(b["witness"], "det");
}

#[test]
fn bounds_over_cap_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "bounds",
        "--dim",
        "40",
        "--witness",
        "idw",
        "--out",
        &out(&dir, "b"),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn spacetime_exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["spacetime", "--out", &out(&dir, "ok")]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("PASS").count(), 5, "{stdout}");

    let mut schedule = json(bundled_geometry());
    let events = schedule["events"].as_array_mut().unwrap();
    let bob = events
        .iter_mut()
        .find(|e| e["label"] == "bob_choice")
        .unwrap();
    let t = f(bob, "t_ns");
    bob["t_ns"] = (t + 200.0).into();
    let late = write_config(&dir, "late.json", &schedule.to_string());
    let o = run(&[
        "spacetime",
        "--schedule",
        &late,
        "--out",
        &out(&dir, "late"),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("C1 FAIL"));

    let empty = write_config(&dir, "empty.json", "");
    let o = run(&["spacetime", "--schedule", &empty, "--out", &out(&dir, "e")]);
    assert_eq!(o.status.code(), Some(1));
}

fn bundled_geometry() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/lab_geometry.json")
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["predict"]).status.code(), Some(1));
    assert_eq!(run(&["bounds", "--witness", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "bad.json",
        r#"{"scenario": {"alphas_pi": [0], "betas_pi": [0]}, "extra": 1}"#,
    );
    assert_eq!(
        run(&["predict", "--config", &cfg, "--out", &out(&dir, "x")])
            .status
            .code(),
        Some(1)
    );
}
