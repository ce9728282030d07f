#![no_main]

use libfuzzer_sys::fuzz_target;
use orbit_core::experiment::SweepConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = SweepConfig::from_toml(text);
});
