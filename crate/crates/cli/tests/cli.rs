use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn entmeter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entmeter")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let out = entmeter(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn write_state(path: &Path, re: [[f64; 4]; 4]) {
    let record = serde_json::json!({"dims": [2, 2], "re": re, "im": vec![vec![0.0; 4]; 4]});
    std::fs::write(path, record.to_string()).unwrap();
}

#[test]
fn exact_bell() {
    let r = json(&["exact", "--family", "bell"]);
    let res = &r["result"];
    assert!((f(&res["concurrence"]["concurrence"]) - 1.0).abs() < 1e-12);
    assert!((f(&res["concurrence"]["ef"]) - 1.0).abs() < 1e-12);
    assert!((f(&res["negativity"]["ec"]) - 1.0).abs() < 1e-12);
    assert_eq!(res["ppt"]["verdict"], "npt");
    assert_eq!(r["tool"], "entmeter");
    assert_eq!(r["config"]["command"], "exact");
}

#[test]
fn exact_werner() {
    let res = &json(&["exact", "--family", "werner", "--p", "0.6"])["result"];
    assert!((f(&res["concurrence"]["concurrence"]) - 0.4).abs() < 1e-10);
    assert!((f(&res["negativity"]["ec"]) - 1.4f64.log2()).abs() < 1e-10);
    assert!((f(&res["negativity"]["ec"]) - 0.4854).abs() < 1e-4);
}

#[test]
fn exact_separable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    // |0⟩⟨0| ⊗ I/2
    let mut re = [[0.0; 4]; 4];
    re[0][0] = 0.5;
    re[1][1] = 0.5;
    write_state(&path, re);
    let res = &json(&["exact", "--in", path.to_str().unwrap()])["result"];
    assert_eq!(f(&res["concurrence"]["concurrence"]), 0.0);
    assert_eq!(f(&res["concurrence"]["ef"]), 0.0);
    assert!(f(&res["negativity"]["negativity"]).abs() < 1e-15);
    assert!(f(&res["negativity"]["ec"]).abs() < 1e-15);
    assert_eq!(res["ppt"]["verdict"], "ppt");
}

#[test]
fn invalid_state_file_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut re = [[0.0; 4]; 4];
    re[0][0] = 0.7;
    re[1][1] = 0.5;
    write_state(&path, re);
    let out = entmeter(&["exact", "--in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trace defect"), "{err}");
    let missing = entmeter(&["exact", "--in", dir.path().join("none.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn protocol_examples() {
    let c = &json(&["protocol", "concurrence", "--family", "bell", "--mode", "ideal"])["result"];
    assert!((f(&c["estimate"]["concurrence"]) - 1.0).abs() < 1e-8);
    assert_eq!(c["readouts"].as_array().unwrap().len(), 4);
    assert!((f(&c["readouts"][0]["p_plus"]) - 41.0 / 65.0).abs() < 1e-12);
    assert!((f(&c["readouts"][3]["shrink"]) - 1.0 / 16_777_217.0).abs() < 1e-20);

    let n = &json(&["protocol", "negativity", "--family", "werner", "--p", "0.8", "--mode", "ideal"])["result"];
    assert!((f(&n["estimate"]["ec"]) - 1.7f64.log2()).abs() < 1e-6);
    assert!((f(&n["estimate"]["ec"]) - 0.7655).abs() < 1e-4);

    let t = &json(&["protocol", "two-stage", "--family", "werner", "--p", "0.2"])["result"];
    assert!(t["outcome"]["message"].as_str().unwrap().contains("second stage abandoned"));
    assert_eq!(t["outcome"]["verdict"], "ppt");
}

#[test]
fn sampled_protocol_records_copies() {
    let r = json(&["protocol", "concurrence", "--family", "bell", "--mode", "sampled", "--shots", "100", "--seed", "3"]);
    assert_eq!(r["result"]["copies_consumed"], 2000);
    assert_eq!(r["result"]["readouts"][1]["shots"], 100);
    let again = json(&["protocol", "concurrence", "--family", "bell", "--mode", "sampled", "--shots", "100", "--seed", "3"]);
    assert_eq!(r, again);
}

#[test]
fn exit_codes() {
    let strict = entmeter(&["protocol", "concurrence", "--family", "bell", "--mode", "sampled", "--shots", "1000", "--strict"]);
    assert_eq!(strict.status.code(), Some(2));
    let lenient = entmeter(&["protocol", "concurrence", "--family", "bell", "--mode", "sampled", "--shots", "1000"]);
    assert_eq!(lenient.status.code(), Some(0));
    let no_shots = entmeter(&["protocol", "concurrence", "--family", "bell", "--mode", "sampled"]);
    assert_eq!(no_shots.status.code(), Some(1));
    let zero_shots = entmeter(&["protocol", "concurrence", "--family", "bell", "--mode", "sampled", "--shots", "0"]);
    assert_eq!(zero_shots.status.code(), Some(1));
    let bad_p = entmeter(&["exact", "--family", "werner", "--p", "1.5"]);
    assert_eq!(bad_p.status.code(), Some(1));
    let ideal_strict = entmeter(&["protocol", "concurrence", "--family", "bell", "--strict"]);
    assert_eq!(ideal_strict.status.code(), Some(0));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const CSV_COLUMNS: [&str; 11] = [
    "method",
    "shots",
    "reps",
    "median_abs_err_c",
    "median_abs_err_ef",
    "copies_consumed",
    "r_p",
    "r_c",
    "r",
    "quoted_r",
    "flagged_runs",
];

#[test]
fn compare_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = entmeter(&[
        "compare", "--family", "werner", "--p", "0.8", "--shots", "1000,10000,100000", "--reps", "50", "--seed", "1",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&path);
    assert_eq!(header, CSV_COLUMNS);
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let ledger: Vec<&str> = row[6..10].iter().map(String::as_str).collect();
        match row[0].as_str() {
            "moments" => assert_eq!(ledger, ["4", "20", "80", ""]),
            "tomography" => assert_eq!(ledger, ["15", "15", "225", "165"]),
            m => panic!("unexpected method {m}"),
        }
    }
    for method in ["moments", "tomography"] {
        let errs: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r[0] == method)
            .map(|r| (r[3].parse().unwrap(), r[4].parse().unwrap()))
            .collect();
        for w in errs.windows(2) {
            assert!(w[1].0 <= w[0].0 && w[1].1 <= w[0].1, "{method}: {errs:?}");
        }
    }
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["reps"], 50);

    // same column set on a different sweep
    let other = dir.path().join("other.csv");
    entmeter(&["compare", "--family", "bell", "--shots", "500", "--reps", "2", "--out", other.to_str().unwrap()]);
    assert_eq!(read_csv(&other).0, CSV_COLUMNS);
}

#[test]
fn compare_rejects_single_repetition() {
    let out = entmeter(&["compare", "--family", "bell", "--shots", "100", "--reps", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn resources_ledgers() {
    let d2 = &json(&["resources", "--d", "2"])["result"];
    let rows = d2.as_array().unwrap();
    assert_eq!((&rows[0]["r_p"], &rows[0]["r_c"], &rows[0]["r"]), (&Value::from(4), &Value::from(20), &Value::from(80)));
    assert_eq!(rows[1]["r_c"], 9);
    assert_eq!(rows[1]["r_p"], 3);
    assert_eq!(rows[2]["r_c"], 15);
    let d3 = &json(&["resources", "--d", "3"])["result"];
    assert_eq!(d3[0]["r_c"], 44);
    assert_eq!(d3[1]["r_c"], 80);
    assert_eq!(entmeter(&["resources", "--d", "1"]).status.code(), Some(1));
}

#[test]
fn selftest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = entmeter(&["selftest", "--seed", "11", "--cases", "8", "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        let text = String::from_utf8_lossy(&out.stdout);
        assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn reports_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    let out = entmeter(&[
        "protocol", "negativity", "--family", "random-mixed", "--dims", "3x3", "--mode", "sampled", "--shots", "5000",
        "--seed", "9", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let replay = entmeter(&["replay", path.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0), "{}", String::from_utf8_lossy(&replay.stdout));

    let mut report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    report["result"]["copies_consumed"] = Value::from(1);
    std::fs::write(&path, report.to_string()).unwrap();
    assert_eq!(entmeter(&["replay", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn file_inputs_replay_without_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let mut re = [[0.0; 4]; 4];
    re[0][0] = 0.5;
    re[3][3] = 0.5;
    re[0][3] = 0.25;
    re[3][0] = 0.25;
    write_state(&state, re);
    let report = dir.path().join("report.json");
    entmeter(&["exact", "--in", state.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    std::fs::remove_file(&state).unwrap();
    assert_eq!(entmeter(&["replay", report.to_str().unwrap()]).status.code(), Some(0));
}
