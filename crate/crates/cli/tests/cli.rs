use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use critlab::mapspec::MapSpec;
use serde_json::Value;

fn critlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critlab"))
        .args(args)
        .current_dir(dir)
        .env("CRITLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn classify_counterexample_and_null() {
    let dir = tempfile::tempdir().unwrap();
    let out = critlab(&["classify", "--n", "2", "--q", "3", "--a", "1", "--d", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "counterexample");
    assert_eq!(v["counterexampleExists"], true);
    assert!((v["exponents"]["seriesExpD2"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-15);

    let out = critlab(&["classify", "--n", "2", "--q", "3", "--a", "3/2", "--d", "1"], dir.path());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["criticalSetNull"], true);
    assert_eq!(v["mainApplies"], true);
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "f.json", r#"{"family":"folding","n":2,"params":{"q":2,"a":0.5}}"#);
    for args in [
        vec!["classify", "--n", "2", "--q", "0.5", "--a", "1", "--d", "1"],
        vec!["classify", "--n", "2", "--q", "3", "--a", "x", "--d", "1"],
        vec!["eval", "--map", &spec, "--point", "0.3"],
        vec!["eval", "--map", &spec, "--point", "2,0"],
        vec!["sweep", "--n", "2", "--q", "3", "--a", "1:2:0", "--d", "1"],
        vec!["cantor", "build", "--n", "2", "--d", "1", "--q", "3", "--a", "3/2", "--k", "2"],
    ] {
        let out = critlab(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn energy_budget_exits_three_with_output() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "b.json", r#"{"family":"ball","n":3,"params":{"beta":1.75}}"#);
    let out = critlab(&["energy", "--map", &spec, "--q", "4", "--a", "1", "--max-cells", "10", "--out", "e.json"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("e.json"));
    assert_eq!(report["converged"], false);
    assert!(dir.path().join("e.json.manifest.json").exists());
}

#[test]
fn eval_identity() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "id.json", r#"{"family":"radial","n":2,"params":{"profile":{"kind":"power","c":1,"p":1}}}"#);
    let out = critlab(&["eval", "--map", &spec, "--point", "0.3,-0.4"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let value: Vec<f64> = serde_json::from_value(v["value"].clone()).unwrap();
    assert!((value[0] - 0.3).abs() < 1e-15 && (value[1] + 0.4).abs() < 1e-15);
    assert!((v["jac"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    assert!((v["distortion"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn cantor_build_round_trip_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = critlab(&["cantor", "build", "--n", "2", "--d", "1", "--q", "3", "--a", "1", "--k", "3", "--out", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["perGen"][1]["a"], 0.25);
    assert_eq!(summary["perGen"][1]["r"], 1.0 / 64.0);

    let text = fs::read_to_string(dir.path().join("c.json")).unwrap();
    let spec = MapSpec::from_json(&text).unwrap();
    assert!(spec.cantor_params().unwrap().0.is_exact());
    let manifest = json(&dir.path().join("c.json.manifest.json"));
    assert_eq!(manifest["mapDigest"], spec.digest().unwrap());
    assert_eq!(manifest["threads"], 2);
    assert_eq!(manifest["outputs"][0], "c.json");
    assert_eq!(manifest["commandLine"][1], "cantor");
    assert!(manifest["wallTimeSeconds"].as_f64().unwrap() >= 0.0);

    // The written spec drives the map commands.
    let out = critlab(&["eval", "--map", "c.json", "--point", "0.99,0.3"], dir.path());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["jac"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn sweep_writes_rows_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = critlab(&["sweep", "--n", "2", "--q", "3", "--a", "1/2:2:1/2", "--d", "1/2:1:1/2", "--out", "s.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mut r = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    assert_eq!(&headers[0], "n");
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8);
    let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r[2].parse().unwrap(), r[3].parse().unwrap())).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    assert!(dir.path().join("s.csv.manifest.json").exists());
}

#[test]
fn folding_injectivity_reports_collisions() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "f.json", r#"{"family":"folding","n":2,"params":{"q":2,"a":0.5}}"#);
    let out = critlab(&["verify", "injectivity", "--map", &spec, "--res", "128", "--out", "i.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = json(&dir.path().join("i.json"));
    assert_eq!(r["verdict"], "collision-found");
    assert!(r["collisionCount"].as_u64().unwrap() > 0);
    let manifest = json(&dir.path().join("i.json.manifest.json"));
    assert_eq!(manifest["mapDigest"], MapSpec::from_json(&fs::read_to_string(dir.path().join(&spec)).unwrap()).unwrap().digest().unwrap());
}
