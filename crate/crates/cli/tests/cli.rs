use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn stickyflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stickyflow")).args(args).env_remove("STICKYFLOW_SEED").output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stickyflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Data rows of a CSV document, header comment and column line removed.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# stickyflow-csv v1"));
    lines.skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn theta_family_from_nu() {
    let doc: Value = serde_json::from_str(&stdout(&stickyflow(&[
        "params", "from-nu", "--atoms", "0.5:1", "--beta", "0", "--n-max", "4",
    ])))
    .unwrap();
    assert_eq!(doc["kind"], "theta");
    assert_eq!(doc["n_max"], 4);
    assert_eq!(doc["values"]["1,1"].as_f64(), Some(1.0));
    assert_eq!(doc["values"]["2,1"].as_f64(), Some(0.5));
}

#[test]
fn family_files_validate_and_convert() {
    let path = scratch("theta.json");
    let out = stickyflow(&["params", "from-nu", "--nu", "uniform:1", "--n-max", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stickyflow(&["params", "validate", "--family", path.to_str().unwrap()]).status.success());
    let p: Value = serde_json::from_str(&stdout(&stickyflow(&[
        "params", "convert", "--family", path.to_str().unwrap(), "--n", "100",
    ])))
    .unwrap();
    assert_eq!(p["kind"], "p");
    assert!((p["values"]["1,1"].as_f64().unwrap() - 0.1).abs() < 1e-12);

    let mut broken: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    broken["values"]["1,1"] = Value::from(5.0);
    let bad = scratch("broken.json");
    std::fs::write(&bad, broken.to_string()).unwrap();
    let out = stickyflow(&["params", "validate", "--family", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_rows_sum_to_one() {
    let text = stdout(&stickyflow(&["flow", "kernel", "--mu", "0.5:1", "--x0", "0", "--s", "0", "--t", "1", "--seed", "7"]));
    assert!(text.lines().nth(1) == Some("site,weight"));
    let total: f64 = csv_rows(&text).iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let args = ["chain", "simulate", "--mu", "endpoints", "--x0", "0,0,3", "--horizon", "5", "--seed", "11"];
    assert_eq!(stickyflow(&args).stdout, stickyflow(&args).stdout);
    let other = ["chain", "simulate", "--mu", "endpoints", "--x0", "0,0,3", "--horizon", "5", "--seed", "12"];
    assert_ne!(stickyflow(&args).stdout, stickyflow(&other).stdout);
}

#[test]
fn environment_seed_is_the_default() {
    let args = ["chain", "sticky-bm", "--theta0", "1", "--horizon", "0.5", "--n", "100"];
    let with_env =
        Command::new(env!("CARGO_BIN_EXE_stickyflow")).args(args).env("STICKYFLOW_SEED", "5").output().unwrap();
    let explicit = stickyflow(&[&args[..], &["--seed", "5"]].concat());
    assert_eq!(with_env.stdout, explicit.stdout);
}

#[test]
fn csv_and_json_carry_the_same_data() {
    let base = ["flow", "particles", "--mu", "0.25:0.5,0.75:0.5", "--x0", "0,0,-2", "--t", "3", "--seed", "2"];
    let csv = stdout(&stickyflow(&base));
    let json: Value = serde_json::from_str(&stdout(&stickyflow(&[&base[..], &["--format", "json"]].concat()))).unwrap();
    let rows = csv_rows(&csv);
    let json_rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), json_rows.len());
    for (a, b) in rows.iter().zip(json_rows) {
        let b = b.as_array().unwrap();
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.parse::<f64>().unwrap(), y.as_f64().unwrap());
        }
    }
    assert_eq!(json["columns"], serde_json::json!(["time", "x_1", "x_2", "x_3"]));
}

#[test]
fn rescale_reads_simulated_paths() {
    let raw = scratch("raw.csv");
    let out = stickyflow(&[
        "chain", "simulate", "--mu", "0.5:1", "--x0", "0,4", "--horizon", "4", "--out", raw.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let raw_rows = csv_rows(&std::fs::read_to_string(&raw).unwrap());
    let scaled = csv_rows(&stdout(&stickyflow(&["chain", "rescale", "--input", raw.to_str().unwrap(), "--n", "4"])));
    assert_eq!(raw_rows.len(), scaled.len());
    for (a, b) in raw_rows.iter().zip(&scaled) {
        let f = |s: &String| s.parse::<f64>().unwrap();
        assert!((f(&a[0]) / 4.0 - f(&b[0])).abs() < 1e-15);
        assert!((f(&a[2]) / 2.0 - f(&b[2])).abs() < 1e-15);
    }
}

#[test]
fn config_supplies_missing_flags() {
    let cfg = scratch("config.json");
    std::fs::write(&cfg, r#"{"mu": "0.5:1", "x0": 0, "t": 1, "seed": 3}"#).unwrap();
    let from_config = stickyflow(&["flow", "kernel", "--config", cfg.to_str().unwrap()]);
    let explicit = stickyflow(&["flow", "kernel", "--mu", "0.5:1", "--x0", "0", "--t", "1", "--seed", "3"]);
    assert_eq!(stdout(&from_config), stdout(&explicit));
    let overridden = stickyflow(&["flow", "kernel", "--config", cfg.to_str().unwrap(), "--seed", "4"]);
    let explicit4 = stickyflow(&["flow", "kernel", "--mu", "0.5:1", "--x0", "0", "--t", "1", "--seed", "4"]);
    assert_eq!(stdout(&overridden), stdout(&explicit4));
}

#[test]
fn exit_rows_have_one_line_per_replica() {
    let text = stdout(&stickyflow(&[
        "halfplane", "exit", "--theta0", "1", "--start", "0.25,0", "--strip", "0.5", "--n", "100", "--replicas", "20",
    ]));
    assert!(text.lines().nth(1) == Some("replica,exit_x,exit_y,sticky_flag"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 20);
    for r in rows {
        let x: f64 = r[1].parse().unwrap();
        assert!(x <= 0.0 || x >= 0.5);
        assert!(r[3] == "0" || r[3] == "1");
    }
}

#[test]
fn occupation_curve_starts_at_one() {
    let rows = csv_rows(&stdout(&stickyflow(&["halfplane", "f", "--theta0", "1", "--t-max", "0.5", "--points", "3"])));
    assert_eq!(rows[0][1], "1.0");
    assert!((rows[2][1].parse::<f64>().unwrap() - 0.427583576155807).abs() < 1e-12);
}

#[test]
fn acceptance_report_lists_every_check() {
    let out = stickyflow(&["verify", "run", "--suite", "acceptance", "--only", "A1,A2,A3,A4,A5", "--seed", "42"]);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["pass"], true);
    let criteria = report["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 5);
    for c in criteria {
        for check in c["checks"].as_array().unwrap() {
            for key in ["name", "estimate", "stderr", "target", "tolerance", "pass"] {
                assert!(check.get(key).is_some(), "{key} missing");
            }
        }
    }
}

#[test]
fn failed_gate_exits_with_one() {
    let out = stickyflow(&["verify", "moments", "--n", "100", "--replicas", "500", "--tol-mean", "1e-6"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["pass"], false);
}

#[test]
fn usage_and_validation_errors_exit_with_two() {
    assert_eq!(stickyflow(&["frobnicate"]).status.code(), Some(2));
    let out = stickyflow(&["params", "from-mu", "--mu", "0.5:0.4", "--n-max", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("is not 1"));
    let out = stickyflow(&["halfplane", "simulate", "--theta0", "1", "--start", "0,-1", "--horizon", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the domain"));
    let out = stickyflow(&["chain", "simulate", "--nu", "0.5:1", "--x0", "0,0", "--horizon", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--n"));
}
