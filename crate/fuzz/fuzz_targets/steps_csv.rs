#![no_main]

use hems_core::traces::{occupancy_from_steps, parse_steps_csv, DEFAULT_STEP_THRESHOLD};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(steps) = parse_steps_csv(data) {
        let occ = occupancy_from_steps(&steps, DEFAULT_STEP_THRESHOLD);
        assert_eq!(occ.len(), steps.len());
    }
});
