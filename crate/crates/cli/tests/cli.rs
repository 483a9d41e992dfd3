use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mandy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mandy"))
        .args(args)
        .current_dir(dir)
        .env_remove("MANDY_SIZE_CAP")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = mandy(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn chua_simulation_has_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--system", "chua", "--out", "c.csv"]);
    let rows = csv_rows(&dir.path().join("c.csv"));
    assert_eq!(rows.len(), 2000);
    assert!(rows.iter().all(|r| r.len() == 6));
    assert_eq!(json(&dir.path().join("c.json"))["system"], "chua");
}

#[test]
fn fpu_samples_stay_in_the_box() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--system", "fpu", "--d", "10", "--m", "1000", "--seed", "7", "--out", "f.csv"],
    );
    let rows = csv_rows(&dir.path().join("f.csv"));
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.len() == 20 && r[..10].iter().all(|v| (-0.1..=0.1).contains(v))));
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["simulate", "--system", "fpu", "--d", "4", "--m", "50", "--seed", "3", "--out", out];
    ok(dir.path(), &args("a.csv"));
    ok(dir.path(), &args("b.csv"));
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
}

#[test]
fn bad_input_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mandy(dir.path(), &["simulate", "--system", "lorenz"]).status.code(), Some(2));
    assert_eq!(mandy(dir.path(), &["identify", "--input", "missing.csv"]).status.code(), Some(2));
    assert_eq!(
        mandy(dir.path(), &["simulate", "--system", "fpu", "--d", "3", "--m", "10", "--low", "1", "--high", "0"])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(dir.path().join("cfg.json"), r#"{"command":"simulate","sytem":"chua"}"#).unwrap();
    assert_eq!(mandy(dir.path(), &["--config", "cfg.json"]).status.code(), Some(2));
}

#[test]
fn chua_is_recovered_by_mandy() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--system", "chua", "--out", "c.csv"]);
    ok(dir.path(), &["identify", "--input", "c.csv", "--method", "mandy", "--out", "fit"]);
    let report = json(&dir.path().join("fit.report.json"));
    let err = report["fits"][0]["rel_error_vs_exact"].as_f64().unwrap();
    assert!(err <= 1e-8, "{err}");
    let cmp = ok(dir.path(), &["compare", "fit.mandy.json", "--exact"]);
    let v: Value = serde_json::from_slice(&cmp.stdout).unwrap();
    assert!(v["pairs"][0]["rel_error"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"command":"simulate","system":"chua","t_end":1.0,"output":"short.csv"}"#,
    )
    .unwrap();
    ok(dir.path(), &["--config", "cfg.json"]);
    assert_eq!(csv_rows(&dir.path().join("short.csv")).len(), 100);
    // flags win over the file
    ok(dir.path(), &["--config", "cfg.json", "simulate", "--t-end", "2", "--out", "long.csv"]);
    assert_eq!(csv_rows(&dir.path().join("long.csv")).len(), 200);
}

// Samples of order 0.1 make the degree-18 monomial features nearly collinear,
// so agreement to 1e-8 only holds while the basis matrix is underdetermined
// by a wide margin (m = 500 against 4096 features).
#[test]
fn fpu_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--system", "fpu", "--d", "6", "--m", "500", "--seed", "1", "--out", "f.csv"],
    );
    ok(dir.path(), &["identify", "--input", "f.csv", "--method", "both", "--out", "fit"]);
    let report = json(&dir.path().join("fit.report.json"));
    let diff = report["mutual_rel_diff"].as_f64().unwrap();
    assert!(diff <= 1e-8, "{diff}");
    let sindy = &report["fits"][0];
    let mandy = &report["fits"][1];
    assert_eq!(sindy["storage"], 4096 * 500);
    assert_eq!(mandy["storage"], 6 * 4 * 500 + 500);
}

#[test]
fn dense_route_respects_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--system", "fpu", "--d", "6", "--m", "100", "--out", "f.csv"],
    );
    let out = mandy(dir.path(), &["--cap", "1000", "identify", "--input", "f.csv", "--method", "sindy"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn kuramoto_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--system", "kuramoto", "--d", "10", "--t-end", "25", "--out", "k.csv"],
    );
    ok(dir.path(), &["identify", "--input", "k.csv", "--out", "fit"]);
    let cmp = ok(dir.path(), &["compare", "fit.mandy.json", "--exact"]);
    let v: Value = serde_json::from_slice(&cmp.stdout).unwrap();
    let err = v["pairs"][0]["rel_error"].as_f64().unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn bench_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["bench", "--system", "fpu", "--d", "3", "--m", "40,60", "--epsilon", "0,0.001", "--out", "b.csv"],
    );
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,d,m,epsilon,seconds,storage_entries,rel_error,status");
    // per m: one sindy row and one mandy row per epsilon
    assert_eq!(lines.len() - 1, 2 * 3);
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
    let manifest = json(&dir.path().join("b.manifest.json"));
    assert_eq!(manifest["rows"], 6);
    assert_eq!(manifest["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn diagnose_rank_two_vector() {
    let dir = tempfile::tempdir().unwrap();
    // u1 x v + u2 x w on modes (4, 4): rank two across the only cut
    let u1 = [1.0, 0.0, 2.0, 1.0];
    let u2 = [0.0, 1.0, -1.0, 3.0];
    let v = [1.0, 2.0, 0.5, -1.0];
    let w = [2.0, -1.0, 1.0, 0.0];
    let values: Vec<f64> = (0..16).map(|k| u1[k % 4] * v[k / 4] + u2[k % 4] * w[k / 4]).collect();
    std::fs::write(
        dir.path().join("v.json"),
        serde_json::json!({ "modes": [4, 4], "values": values }).to_string(),
    )
    .unwrap();
    ok(dir.path(), &["diagnose", "--input", "v.json", "--out", "p.json"]);
    let p = json(&dir.path().join("p.json"));
    let spec: Vec<f64> = p["spectra"][0].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let total: f64 = spec.iter().sum();
    assert!(spec[0] > 0.0 && spec[1] > 0.0);
    assert!(spec[2..].iter().all(|&s| s <= 1e-12 * total));
    let eps: Vec<f64> = p["eps_of_r"][0].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(eps[2] <= 1e-12 * total && eps[1] > 0.0);
}

#[test]
fn schema_check_accepts_outputs_and_rejects_junk() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--system", "chua", "--t-end", "2", "--out", "c.csv"]);
    ok(dir.path(), &["identify", "--input", "c.csv", "--method", "both", "--out", "fit"]);
    let out = ok(
        dir.path(),
        &["schema-check", "c.csv", "c.json", "fit.sindy.json", "fit.mandy.json", "fit.report.json"],
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.contains(": ok (")).count(), 5);
    std::fs::write(dir.path().join("junk.json"), r#"{"hello": 1}"#).unwrap();
    assert_eq!(mandy(dir.path(), &["schema-check", "junk.json"]).status.code(), Some(2));
}
