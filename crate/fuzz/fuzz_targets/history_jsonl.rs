#![no_main]

use libfuzzer_sys::fuzz_target;
use orbit_core::metrics::RunMetrics;
use orbit_core::trainer::read_jsonl;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = read_jsonl(text) {
        let m = RunMetrics::of(&records);
        assert!(m.steps <= records.len());
    }
});
