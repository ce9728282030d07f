#![no_main]

use libfuzzer_sys::fuzz_target;
use orbit_core::experiment::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        let _ = cfg.train.trainer_config();
        // Only the echo is checked; generating the graph can be slow.
        RunConfig::from_toml(&cfg.to_toml()).expect("echoed config parses");
    }
});
