use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hems(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hems"))
        .args(args)
        .output()
        .expect("spawn hems")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let text = std::fs::read_to_string(data("config.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn check_reports_reference_bounds() {
    let out = hems(&["check", "--config", &data("config.json")]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["V"].as_f64().unwrap() - 3.29318).abs() < 1e-4);
    assert_eq!(v["D_max"], 5);
    assert!((v["bounds"]["v2_max"].as_f64().unwrap() - 23.6364).abs() < 1e-3);
}

#[test]
fn b3_equals_proposed_without_battery() {
    let tmp = tempfile::tempdir().unwrap();
    let zeroed = write_config(tmp.path(), |v| {
        v["u_cmax"] = 0.0.into();
        v["u_dmax"] = 0.0.into();
    });
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let common = ["--trace", &data("trace.csv"), "--ev", &data("ev.csv")];
    let out = hems(
        &[
            &[
                "simulate",
                "--config",
                &data("config.json"),
                "--policy",
                "b3",
                "--out-dir",
                s(&a),
            ][..],
            &common[..],
        ]
        .concat(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = hems(
        &[
            &[
                "simulate",
                "--config",
                s(&zeroed),
                "--policy",
                "proposed",
                "--out-dir",
                s(&b),
            ][..],
            &common[..],
        ]
        .concat(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ca = std::fs::read(a.join("slots.csv")).unwrap();
    let cb = std::fs::read(b.join("slots.csv")).unwrap();
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
}

#[test]
fn simulate_is_deterministic_and_writes_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["x", "y"] {
        let dir = tmp.path().join(name);
        let out = hems(&[
            "simulate",
            "--config",
            &data("config.json"),
            "--trace",
            &data("trace.csv"),
            "--ev",
            &data("ev.csv"),
            "--out-dir",
            s(&dir),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((
            std::fs::read(dir.join("slots.csv")).unwrap(),
            std::fs::read(dir.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: serde_json::Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert_eq!(v["policy"], "P");
    assert!(v["totals"]["total"].is_number());
    assert_eq!(v["temp_range"].as_array().unwrap().len(), 2);
    let header = String::from_utf8_lossy(&outputs[0].0);
    assert!(header.starts_with("t,e,x,y,g,T,Q,Z,G,H,K,phi1,phi2,occupied_next\n"));
}

#[test]
fn sweep_has_row_per_policy_and_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(threads);
        let out = Command::new(env!("CARGO_BIN_EXE_hems"))
            .env("HEMS_THREADS", threads)
            .args([
                "sweep",
                "--config",
                &data("config.json"),
                "--trace",
                &data("trace.csv"),
                "--ev",
                &data("ev.csv"),
                "--param",
                "gamma",
                "--values",
                "0,0.002,0.01,0.02",
                "--out-dir",
                s(&dir),
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        files.push(std::fs::read_to_string(dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let rows: Vec<&str> = files[0].lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows[0].starts_with("P,gamma,0,"));
    assert!(rows[15].starts_with("B3,gamma,0.02,"));
}

#[test]
fn validation_failures_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let slow = write_config(tmp.path(), |v| v["epsilon"] = 0.9.into());
    let out = hems(&["check", "--config", s(&slow)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_max - t_min > psi"));

    let out = hems(&["check", "--config", s(&tmp.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(1));

    let out = hems(&["check", "--config", &data("config.json"), "--v", "5"]);
    assert_eq!(out.status.code(), Some(1));

    let out = hems(&["check", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));

    let bad_trace = tmp.path().join("trace.csv");
    std::fs::write(
        &bad_trace,
        "t,T_out,B,rho,pi,T_ref\n0,40,0.5,0,1,22.5\n1,5,0.5,0,1,22.5\n",
    )
    .unwrap();
    let out = hems(&[
        "simulate",
        "--config",
        &data("config.json"),
        "--trace",
        s(&bad_trace),
        "--out-dir",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("T_out"));
}

#[test]
fn gen_trace_matches_bundled_data() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("trace.csv");
    let ev = tmp.path().join("ev.csv");
    let out = hems(&[
        "gen-trace",
        "--days",
        "31",
        "--seed",
        "7",
        "--out",
        s(&trace),
        "--ev-out",
        s(&ev),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        std::fs::read(&trace).unwrap(),
        std::fs::read(data("trace.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(&ev).unwrap(),
        std::fs::read(data("ev.csv")).unwrap()
    );
}

#[test]
fn oracle_reports_no_violations() {
    let out = hems(&["oracle", "--samples", "200", "--grid", "9", "--seed", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["violations"], 0);
    assert_eq!(v["solver_failures"], 0);
}
