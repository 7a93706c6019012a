use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

fn combmetro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combmetro")).args(args).output().expect("binary runs")
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.display().to_string()
}

fn noisy_rz(noise: &str, p: f64, n: usize) -> Value {
    json!({
        "type": "noisy_signal",
        "signal": {"kind": "rz", "phi": HALF_PI},
        "noise": {"kind": noise, "p": p},
        "n": n
    })
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn lambda(doc: &Value, set: &str) -> f64 {
    doc["results"].as_array().unwrap().iter().find(|r| r["strategy_set"] == set).unwrap()["lambda"].as_f64().unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(str::to_owned).collect()).collect();
    (header, rows)
}

#[test]
fn phase_flip_run_reports_seq_and_switch_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "schema_version": 1,
        "process": {
            "type": "noisy_signal",
            "signal": {"kind": "rx", "phi": HALF_PI},
            "noise": {"kind": "phase_flip", "p": 0.5},
            "order": "noise_after_signal",
            "n": 2
        },
        "strategy_sets": ["seq", "swi"]
    });
    let path = write_json(dir.path(), "pf.json", &cfg);
    let doc = stdout_json(&combmetro(&["run", &path]));
    assert!((lambda(&doc, "seq") - 4.0).abs() < 1e-3);
    assert!((lambda(&doc, "swi") - 1.5).abs() < 1e-3);
    for r in doc["results"].as_array().unwrap() {
        assert!(r["failure"].is_null());
        assert!(r["oracle"]["gap"].as_f64().unwrap() <= 1e-4);
    }
}

#[test]
fn fully_damped_process_gives_zero_for_every_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "schema_version": 1,
        "process": noisy_rz("amplitude_damping", 1.0, 2),
        "strategy_sets": ["par", "seq", "swi", "sup", "ico"]
    });
    let path = write_json(dir.path(), "ad1.json", &cfg);
    let doc = stdout_json(&combmetro(&["run", &path]));
    for set in ["par", "seq", "swi", "sup", "ico"] {
        assert!(lambda(&doc, set).abs() <= 1e-8, "{set}");
    }
}

#[test]
fn malformed_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ \"schema_version\": 1, ").unwrap();
    let o = combmetro(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));
}

#[test]
fn config_guards_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let base = json!({
        "schema_version": 1,
        "process": noisy_rz("bit_flip", 0.1, 2),
        "strategy_sets": ["seq"],
        "sweep": {"parameter": "/noise/p", "grid": [0.1]}
    });
    let mut cases = Vec::new();
    let mut empty = base.clone();
    empty["sweep"]["grid"] = json!([]);
    cases.push(("sweep", empty));
    let mut big = base.clone();
    big["process"]["n"] = json!(4);
    cases.push(("run", big));
    let mut pointer = base.clone();
    pointer["sweep"]["parameter"] = json!("/noise/q");
    cases.push(("sweep", pointer));
    let mut unknown = base.clone();
    unknown["extra"] = json!(true);
    cases.push(("run", unknown));
    let mut version = base.clone();
    version["schema_version"] = json!(2);
    cases.push(("run", version));
    let mut no_sets = base.clone();
    no_sets["strategy_sets"] = json!([]);
    cases.push(("run", no_sets));
    let mut cf = base.clone();
    cf["process"]["n"] = json!(3);
    cf["strategy_sets"] = json!(["control_free"]);
    cases.push(("run", cf));
    let mut nm = base.clone();
    nm["process"] = json!({"type": "nonmarkovian", "phi": 0.0, "g": 1.0, "t": 1.0, "t_segment": 0.5});
    cases.push(("run", nm));
    for (i, (cmd, cfg)) in cases.into_iter().enumerate() {
        let path = write_json(dir.path(), &format!("c{i}.json"), &cfg);
        let o = combmetro(&[cmd, &path]);
        assert_eq!(o.status.code(), Some(3), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let path = write_json(dir.path(), "ok.json", &base);
    assert_eq!(combmetro(&["run", &path, "--tol-gap", "-1"]).status.code(), Some(3));
    assert_eq!(combmetro(&["run", &path, "--jobs", "0"]).status.code(), Some(3));
    assert_eq!(combmetro(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(combmetro(&["run", "/nonexistent/config.json"]).status.code(), Some(3));
    assert_eq!(combmetro(&["--help"]).status.code(), Some(0));
}

#[test]
fn amplitude_damping_sweep_is_ordered_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "schema_version": 1,
        "process": noisy_rz("amplitude_damping", 0.0, 2),
        "strategy_sets": ["par", "seq", "swi", "sup", "ico"],
        "sweep": {"parameter": "/noise/p", "grid": [0.0, 0.3, 0.6, 1.0]}
    });
    let path = write_json(dir.path(), "ad.json", &cfg);
    let a = combmetro(&["sweep", &path, "--jobs", "1"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = combmetro(&["sweep", &path, "--jobs", "3"]);
    assert_eq!(a.stdout, b.stdout, "output depends on the worker count");
    let text = String::from_utf8(a.stdout).unwrap();
    let (header, rows) = csv_rows(&text);
    assert_eq!(
        header,
        ["grid_value", "par", "seq", "swi", "sup", "ico", "par_oracle_gap", "seq_oracle_gap", "swi_oracle_gap", "sup_oracle_gap", "ico_oracle_gap", "flags"]
    );
    assert_eq!(rows.len(), 4);
    for (row, p) in rows.iter().zip([0.0, 0.3, 0.6, 1.0]) {
        assert_eq!(row[0].parse::<f64>().unwrap(), p);
        let v: Vec<f64> = row[1..6].iter().map(|x| x.parse().unwrap()).collect();
        for (lo, hi) in [(0, 1), (1, 3), (2, 3), (3, 4)] {
            assert!(v[lo] <= v[hi] + 1e-6, "p = {p}: {v:?}");
        }
        assert!(row[11].is_empty());
    }
}

#[test]
fn bit_flip_sweep_is_symmetric_about_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bf.csv");
    let cfg = json!({
        "schema_version": 1,
        "process": noisy_rz("bit_flip", 0.0, 2),
        "strategy_sets": ["par", "seq", "ico"],
        "sweep": {"parameter": "/noise/p", "grid": [0.2, 0.8]},
        "verify": false
    });
    let path = write_json(dir.path(), "bf.json", &cfg);
    let o = combmetro(&["sweep", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let (_, rows) = csv_rows(&std::fs::read_to_string(&out).unwrap());
    for c in 1..4 {
        let (a, b): (f64, f64) = (rows[0][c].parse().unwrap(), rows[1][c].parse().unwrap());
        assert!((a - b).abs() <= 1e-6 * a.max(1.0), "column {c}: {a} vs {b}");
    }
}

#[test]
fn sweep_flags_failed_points_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "schema_version": 1,
        "process": noisy_rz("amplitude_damping", 0.0, 2),
        "strategy_sets": ["par"],
        "sweep": {"parameter": "/noise/p", "grid": [0.4, 1.5]},
        "verify": false
    });
    let path = write_json(dir.path(), "fl.json", &cfg);
    let o = combmetro(&["sweep", &path]);
    assert_eq!(o.status.code(), Some(2));
    let (_, rows) = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    assert!((rows[0][1].parse::<f64>().unwrap() - 2.25).abs() < 1e-6);
    assert_eq!(rows[0][3], "");
    assert_eq!(rows[1][1], "");
    assert_eq!(rows[1][3], "par:process");
}

#[test]
fn exported_strategies_validate_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let strategies = dir.path().join("strategies");
    let cfg = json!({
        "schema_version": 1,
        "process": noisy_rz("amplitude_damping", 0.4, 2),
        "strategy_sets": ["seq", "swi", "ico"],
        "outputs": {"strategies": strategies, "result": dir.path().join("result.json")}
    });
    let path = write_json(dir.path(), "ad.json", &cfg);
    let o = combmetro(&["run", &path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert!((lambda(&result, "seq") - 2.5573778).abs() < 1e-6);

    for set in ["seq", "swi", "ico"] {
        let doc = strategies.join(format!("{set}.json"));
        let v = stdout_json(&combmetro(&["validate", doc.to_str().unwrap(), &path]));
        assert_eq!(v["pass"], true, "{set}: {v}");
        assert!(v["membership_residual"].as_f64().unwrap() <= 1e-8);
    }
    let seq: Value = serde_json::from_str(&std::fs::read_to_string(strategies.join("seq.json")).unwrap()).unwrap();
    assert!(!seq["isometries"].as_array().unwrap().is_empty());

    let mut wrong_lambda = seq.clone();
    wrong_lambda["lambda"] = json!(3.0);
    let p = write_json(dir.path(), "wrong_lambda.json", &wrong_lambda);
    let o = combmetro(&["validate", &p, &path]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(serde_json::from_slice::<Value>(&o.stdout).unwrap()["pass"], false);

    let mut bad_iso = seq.clone();
    let entry = &mut bad_iso["isometries"][0]["steps"][0]["entries"][0][0];
    *entry = json!(entry.as_f64().unwrap() + 0.5);
    let p = write_json(dir.path(), "bad_iso.json", &bad_iso);
    assert_eq!(combmetro(&["validate", &p, &path]).status.code(), Some(2));

    let p = write_json(dir.path(), "garbage.json", &json!({"schema_version": 1}));
    assert_eq!(combmetro(&["validate", &p, &path]).status.code(), Some(3));

    let other = write_json(
        dir.path(),
        "n3.json",
        &json!({"schema_version": 1, "process": noisy_rz("amplitude_damping", 0.4, 3), "strategy_sets": ["seq"]}),
    );
    let doc = strategies.join("seq.json");
    assert_eq!(combmetro(&["validate", doc.to_str().unwrap(), &other]).status.code(), Some(3));
}

#[test]
fn nonmarkovian_time_conventions_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |time: Value| {
        let mut process = json!({"type": "nonmarkovian", "phi": 0.0, "g": 1.0});
        process.as_object_mut().unwrap().extend(time.as_object().unwrap().clone());
        json!({"schema_version": 1, "process": process, "strategy_sets": ["seq", "control_free"], "verify": false})
    };
    let a = write_json(dir.path(), "total.json", &mk(json!({"t": 1.2})));
    let b = write_json(dir.path(), "segment.json", &mk(json!({"t_segment": 0.6})));
    let (a, b) = (stdout_json(&combmetro(&["run", &a])), stdout_json(&combmetro(&["run", &b])));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["total_time"].as_f64(), Some(1.2));
    assert!(lambda(&a, "control_free") <= lambda(&a, "seq") + 1e-8);
}
