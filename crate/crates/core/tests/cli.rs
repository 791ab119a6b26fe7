use std::path::Path;
use std::process::{Command, Output};

use gilbert_hsd::gilbert::{Trace, TraceRecord};
use gilbert_hsd::io::{read_state, read_trace_file, write_trace_file, StateFile};
use gilbert_hsd::linalg::hsd_sq;
use gilbert_hsd::states::{css_max_entangled, ghz, upb_tiles_state};
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gilbert-hsd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn state_command_writes_reference_states() {
    let dir = tempfile::tempdir().unwrap();
    let css = path(&dir, "css.json");
    assert_eq!(
        cli(&["state", "max_entangled_css:2", "--out", &css])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(read_state(&css).unwrap(), css_max_entangled(2).unwrap());
    let m = json(&css)["matrix"].clone();
    assert_eq!(m[0][0][0].as_f64(), Some(1.0 / 3.0));
    assert_eq!(m[1][1][0].as_f64(), Some(1.0 / 6.0));
    assert_eq!(m[0][3][0].as_f64(), Some(1.0 / 6.0));

    let g = path(&dir, "ghz.json");
    assert_eq!(cli(&["state", "ghz:3", "--out", &g]).status.code(), Some(0));
    assert_eq!(read_state(&g).unwrap(), ghz(3).unwrap());

    let u = path(&dir, "upb.json");
    assert_eq!(
        cli(&["state", "upb_tiles", "--out", &u]).status.code(),
        Some(0)
    );
    assert_eq!(read_state(&u).unwrap(), upb_tiles_state());
}

#[test]
fn state_file_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = path(&dir, "first.json");
    let out = cli(&["state", "upb_tiles", "--out", &first]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&first).unwrap();
    let second = path(&dir, "second.json");
    StateFile::read(&first).unwrap().write(&second).unwrap();
    assert_eq!(text, std::fs::read_to_string(&second).unwrap());
}

#[test]
fn unknown_state_name_exits_2() {
    let out = cli(&["state", "werner:2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["run", "--state", "nosuchstate", "--halt-cs", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        cli(&["run", "--state", "bell", "--bogus"]).status.code(),
        Some(2)
    );
}

#[test]
fn run_writes_trace_meta_and_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, meta, fin) = (
        path(&dir, "t.csv"),
        path(&dir, "m.json"),
        path(&dir, "f.json"),
    );
    let out = cli(&[
        "run",
        "--state",
        "bell",
        "--halt-cs",
        "1000",
        "--seed",
        "1",
        "--trace",
        &trace,
        "--meta",
        &meta,
        "--final",
        &fin,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let records = read_trace_file(&trace).unwrap();
    assert_eq!(records.len(), 1000);
    assert!(Trace::from_records(records.clone()).is_ok());
    let header = std::fs::read_to_string(&trace).unwrap();
    assert!(header.starts_with("c_t,c_s,d2\n"));

    let m = json(&meta);
    for key in [
        "state",
        "dims",
        "seed",
        "halt",
        "final_d2",
        "c_t",
        "c_s",
        "wall_seconds",
    ] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    let d2 = m["final_d2"].as_f64().unwrap();
    assert_eq!(d2, records.last().unwrap().d2);
    assert!((1.0 / 3.0..=1.0 / 3.0 + 0.01).contains(&d2));
    assert_eq!(m["c_s"].as_u64(), Some(1000));

    let rho1 = read_state(&fin).unwrap();
    let rho0 = gilbert_hsd::states::bell();
    assert!((hsd_sq(&rho0, &rho1).unwrap() - d2).abs() <= 1e-10);
}

#[test]
fn seeded_runs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    for p in [&a, &b] {
        let out = cli(&[
            "run",
            "--state",
            "ghz:3",
            "--halt-cs",
            "200",
            "--seed",
            "9",
            "--trace",
            p,
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn run_options() {
    let out = cli(&[
        "run",
        "--state",
        "bell",
        "--halt-cs",
        "50",
        "--real-only",
        "--box-muller",
    ]);
    assert!(out.status.success());
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("c_t="), "{line}");

    let out = cli(&[
        "run",
        "--state",
        "ghz:3",
        "--halt-cs",
        "20",
        "--sym",
        "perm:1,2,0",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = cli(&[
        "run",
        "--state",
        "bell",
        "--halt-cs",
        "50",
        "--threads",
        "3",
    ]);
    assert!(out.status.success());

    let out = cli(&["run", "--state", "bell", "--dims", "3,3", "--halt-cs", "1"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn fit_recovers_synthetic_limit() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = path(&dir, "t.csv");
    let records = (1..=1000u64)
        .map(|s| TraceRecord {
            c_t: s * s,
            c_s: s,
            d2: 0.002 + (-(s as f64 / 50.0).powf(1.0 / 8.0)).exp(),
        })
        .collect();
    write_trace_file(&trace_path, &Trace::from_records(records).unwrap()).unwrap();
    let report = path(&dir, "fit.json");
    let out = cli(&["fit", &trace_path, "--stride", "10", "--out", &report]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&report);
    assert!((r["a"].as_f64().unwrap() - 0.002).abs() <= 2e-4);
    assert!(r["r"].as_f64().unwrap() >= 0.999);
    assert!((r["f"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert_eq!(r["stride"].as_u64(), Some(10));
    assert!(r.get("b").is_some() && r.get("r2").is_some());
}

#[test]
fn fit_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let two = path(&dir, "two.csv");
    std::fs::write(&two, "c_t,c_s\n1,1\n2,2\n").unwrap();
    assert_eq!(cli(&["fit", &two]).status.code(), Some(3));

    let short = path(&dir, "short.csv");
    std::fs::write(&short, "c_t,c_s,d2\n1,1,0.5\n3,2,0.4\n").unwrap();
    assert_eq!(
        cli(&["fit", &short, "--stride", "1"]).status.code(),
        Some(4)
    );

    assert_eq!(
        cli(&["fit", &path(&dir, "missing.csv")]).status.code(),
        Some(3)
    );
}

#[test]
fn witness_command() {
    let dir = tempfile::tempdir().unwrap();
    let css = path(&dir, "css.json");
    assert!(cli(&["state", "max_entangled_css:2", "--out", &css])
        .status
        .success());
    let (report, op) = (path(&dir, "w.json"), path(&dir, "op.json"));
    let out = cli(&[
        "witness",
        "--rho0",
        "bell",
        "--rho1",
        &css,
        "--out",
        &report,
        "--operator",
        &op,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&report);
    assert_eq!(r["entangled"], Value::Bool(true));
    assert!((r["lambda"].as_f64().unwrap() - 1.0 / 6.0).abs() <= 1e-6);
    assert!((r["value_rho0"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    assert!((r["margin"].as_f64().unwrap() - 1.0 / 3.0).abs() <= 1e-6);
    assert_eq!(json(&op)["kind"], Value::String("operator".into()));

    let out = cli(&["witness", "--rho0", "bell", "--rho1", "bell"]);
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["entangled"], Value::Bool(false));

    let out = cli(&["witness", "--rho0", "bell", "--rho1", "max_entangled:3"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn operator_file_is_not_a_state() {
    let dir = tempfile::tempdir().unwrap();
    let op = path(&dir, "op.json");
    assert!(cli(&[
        "witness",
        "--rho0",
        "bell",
        "--rho1",
        "max_entangled_css:2",
        "--operator",
        &op,
        "--out",
        &path(&dir, "r.json")
    ])
    .status
    .success());
    assert_eq!(
        cli(&["run", "--state", &op, "--halt-cs", "1"])
            .status
            .code(),
        Some(4)
    );
}
