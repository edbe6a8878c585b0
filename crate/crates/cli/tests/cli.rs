use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

const DEFAULT: &str = include_str!("../../../configs/default.json");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conegrowth"))
        .args(args)
        .output()
        .expect("spawn conegrowth")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn default_config() -> Value {
    serde_json::from_str(DEFAULT).unwrap()
}

fn write_config(dir: &Path, cfg: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn gamma_torus_of_twice_euclidean() {
    let v = stdout_json(&run(&["gamma-torus"]));
    let first = &v["gamma_torus"][0];
    assert_eq!(first["f"], "euclid");
    assert_eq!(first["g"], "twice");
    assert_eq!(first["growth"]["value"], 2.0);
}

#[test]
fn rot_of_translation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config();
    cfg["rot"] = json!({ "elements": ["t07"], "iterations": 1000 });
    let path = write_config(dir.path(), &cfg);
    let v = stdout_json(&run(&["--config", &path, "rot"]));
    let r = &v["rot"][0];
    assert!((r["rot"].as_f64().unwrap() - 0.7).abs() <= 1e-3);
    assert!(r["enclosure"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn verify_is_deterministic() {
    let a = run(&["--seed", "7", "verify"]);
    let b = run(&["--seed", "7", "verify"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 12);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();

    let mut cfg = default_config();
    cfg["rot"]["unexpected"] = json!(1);
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run(&["--config", &path, "rot"]).status.code(), Some(2));

    let mut cfg = default_config();
    cfg.as_object_mut().unwrap().remove("shape");
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run(&["--config", &path, "shape"]).status.code(), Some(2));

    let mut cfg = default_config();
    cfg["circle"]["elements"]["bad"] = json!([{ "a": 0.1, "harmonics": [{ "j": 1, "b": 0.5, "phi": 0.0 }] }]);
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run(&["--config", &path, "rot"]).status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["--config", missing.to_str().unwrap(), "rot"]).status.code(), Some(2));
    assert_eq!(run(&["--jobs", "0", "rot"]).status.code(), Some(2));
}

#[test]
fn out_directory_receives_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(run(&["--out", out, "gamma-torus"]).status.success());
    assert!(run(&["--out", out, "shape"]).status.success());
    for name in ["gamma_torus.json", "gamma_torus.csv", "shape.json", "shape.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let mut r = csv::Reader::from_path(dir.path().join("gamma_torus.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header[..2], ["f".to_owned(), "g".to_owned()]);
    assert_eq!(r.records().count(), 4);
}

#[test]
fn csv_metric_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("q1,q2,g11,g12,g21,g22\n");
    for j in 0..4 {
        for i in 0..4 {
            text.push_str(&format!("{},{},4,0,0,1\n", i as f64 / 4.0, j as f64 / 4.0));
        }
    }
    std::fs::write(dir.path().join("table.csv"), text).unwrap();
    let mut cfg = default_config();
    cfg["metrics"]["table"] = json!({ "csv": "table.csv" });
    cfg["stable_norm"] = json!({
        "runs": [{ "metric": "table", "e": [1, 0] }],
        "horizon": 2,
        "resolution": 16,
        "dual": false
    });
    let path = write_config(dir.path(), &cfg);
    let v = stdout_json(&run(&["--config", &path, "stable-norm"]));
    let text = v.to_string();
    let primal = &v["stable_norm"][0]["estimate"]["envelope"];
    assert!((primal.as_f64().unwrap_or(f64::NAN) - 2.0).abs() < 1e-9, "{text}");
}
