use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fkhom::DomainMask;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fkhom")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, coeff: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, format!(r#"{{"coeff": {coeff}, "grid": {{"cells_per_period": 8}}}}"#))
        .unwrap();
    path
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn cell_reports_laminate_means() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "laminate", "params": {"alpha": 1.0, "beta": 4.0}}"#);
    let out = dir.path().join("cell.json");
    let o = run(&["cell", "--config", arg(&cfg), "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    let yy = v["abar"][1][1].as_f64().unwrap();
    assert!((yy - 2.5).abs() < 1e-8, "arithmetic mean direction {yy}");
    assert!(v["abar"][0][0].as_f64().unwrap() < yy);
}

#[test]
fn eig_and_metrics_on_mask_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "constant", "params": {"M": [[1.0, 0.0], [0.0, 1.0]]}}"#);
    let h = 1.0 / 16.0;
    let square = DomainMask::from_fn(16, 16, h, [0.0, 0.0], |_| true).unwrap();
    let shifted = DomainMask::from_fn(16, 16, h, [0.125, 0.0], |_| true).unwrap();
    let (a, b) = (dir.path().join("a.fkmask"), dir.path().join("b.fkmask"));
    square.write(&a).unwrap();
    shifted.write(&b).unwrap();

    let out = dir.path().join("eig.json");
    let o = run(&["eig", "--config", arg(&cfg), "--mask", arg(&a), "--k", "2", "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    let l1 = v["lambda1"].as_f64().unwrap();
    assert!((l1 / (2.0 * std::f64::consts::PI.powi(2)) - 1.0).abs() < 0.01);
    assert!(v["lambda2"].as_f64().unwrap() > l1);

    let o = run(&["metrics", "--mask-a", arg(&a), "--mask-b", arg(&b)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["symmetric_difference"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn optimize_writes_mask_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "constant", "params": {"M": [[1.0, 0.0], [0.0, 1.0]]}}"#);
    let (mask, trace) = (dir.path().join("opt.fkmask"), dir.path().join("trace.csv"));
    let o = run(&[
        "optimize", "--config", arg(&cfg), "--mu", "0.2", "--out", arg(&mask), "--trace", arg(&trace),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = DomainMask::read(&mask).unwrap();
    let want = (fkhom::special::LAMBDA_UNIT_DISK * std::f64::consts::PI / 0.2).sqrt();
    assert!((m.volume() / want - 1.0).abs() < 0.05, "volume {} vs {want}", m.volume());
    assert!(std::fs::read_to_string(trace).unwrap().lines().count() >= 2);
}

#[test]
fn invalid_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"kind": "trig", "params": {"c": 0.5, "A": 1.0}}"#);
    let out = dir.path().join("cell.json");
    let o = run(&["cell", "--config", arg(&cfg), "--out", arg(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let missing = dir.path().join("missing.json");
    assert!(!run(&["cell", "--config", arg(&missing), "--out", arg(&out)]).status.success());

    let cfg = write_config(dir.path(), r#"{"kind": "trig", "params": {"c": 2.0, "A": 1.0}}"#);
    let o = run(&["volmap", "--config", arg(&cfg), "--mu-min", "0.2", "--mu-max", "0.1", "--out", arg(&out)]);
    assert!(!o.status.success());
}
