#![no_main]

use libfuzzer_sys::fuzz_target;
use orbit_core::ParamSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = ParamSet::from_text(text) {
        let again = ParamSet::from_text(&p.to_text()).expect("printed parameters parse");
        assert_eq!(p.shape(), again.shape());
        assert_eq!(p.mask(), again.mask());
    }
});
