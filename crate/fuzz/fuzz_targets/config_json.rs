#![no_main]

use hems_core::config::validate_config;
use hems_core::params::{derive_controller_params, ParamOverrides};
use hems_core::HomeConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = HomeConfig::from_json_str(text) else {
        return;
    };
    if let Ok(valid) = validate_config(cfg) {
        if let Ok((params, bounds)) = derive_controller_params(&valid, &ParamOverrides::default()) {
            assert!(params.v > 0.0 && params.v.is_finite());
            assert!(bounds.gamma_min <= bounds.gamma_max + 1e-6 * bounds.gamma_max.abs().max(1.0));
        }
    }
});
