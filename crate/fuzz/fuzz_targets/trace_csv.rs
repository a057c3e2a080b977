#![no_main]

use hems_core::traces::{parse_trace_csv, write_trace_csv};
use hems_core::HomeConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(bundle) = parse_trace_csv(data, 0.9) else {
        return;
    };
    assert!(bundle.lengths_consistent());
    let _ = bundle.validate(&HomeConfig::reference());
    let mut buf = Vec::new();
    write_trace_csv(&bundle, &mut buf).unwrap();
    let back = parse_trace_csv(buf.as_slice(), 0.9).unwrap();
    assert_eq!(back, bundle);
});
