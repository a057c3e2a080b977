//! Replays the checked-in fuzz corpus through the parsers on stable, with
//! the same invariants the fuzz targets assert.

use std::path::PathBuf;

use hems_core::config::validate_config;
use hems_core::traces::{
    occupancy_from_steps, parse_ev_csv, parse_steps_csv, parse_trace_csv, write_ev_csv,
    write_trace_csv, DEFAULT_STEP_THRESHOLD,
};
use hems_core::HomeConfig;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus {target}");
    out
}

#[test]
fn config_json_seeds() {
    let mut valid = 0;
    for (name, bytes) in corpus("config_json") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(cfg) = HomeConfig::from_json_str(text) {
            if validate_config(cfg).is_ok() {
                valid += 1;
            }
        } else {
            eprintln!("{name}: rejected");
        }
    }
    assert!(valid >= 1);
}

#[test]
fn trace_csv_seeds() {
    let mut parsed = 0;
    for (_, bytes) in corpus("trace_csv") {
        if let Ok(bundle) = parse_trace_csv(bytes.as_slice(), 0.9) {
            parsed += 1;
            let mut buf = Vec::new();
            write_trace_csv(&bundle, &mut buf).unwrap();
            assert_eq!(parse_trace_csv(buf.as_slice(), 0.9).unwrap(), bundle);
        }
    }
    assert!(parsed >= 1);
}

#[test]
fn ev_csv_seeds() {
    for (_, bytes) in corpus("ev_csv") {
        if let Ok(reqs) = parse_ev_csv(bytes.as_slice()) {
            let mut buf = Vec::new();
            write_ev_csv(&reqs, &mut buf).unwrap();
            assert_eq!(parse_ev_csv(buf.as_slice()).unwrap(), reqs);
        }
    }
}

#[test]
fn steps_csv_seeds() {
    for (_, bytes) in corpus("steps_csv") {
        if let Ok(steps) = parse_steps_csv(bytes.as_slice()) {
            assert_eq!(
                occupancy_from_steps(&steps, DEFAULT_STEP_THRESHOLD).len(),
                steps.len()
            );
        }
    }
}
