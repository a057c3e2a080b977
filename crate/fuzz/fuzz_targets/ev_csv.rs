#![no_main]

use hems_core::traces::{arrival_stream, parse_ev_csv, write_ev_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(reqs) = parse_ev_csv(data) else {
        return;
    };
    let mut buf = Vec::new();
    write_ev_csv(&reqs, &mut buf).unwrap();
    assert_eq!(parse_ev_csv(buf.as_slice()).unwrap(), reqs);
    let a = arrival_stream(&reqs, 64, 3.0);
    assert!(a.iter().all(|v| *v >= 0.0));
});
