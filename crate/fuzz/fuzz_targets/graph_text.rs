#![no_main]

use libfuzzer_sys::fuzz_target;
use orbit_core::Graph;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = Graph::from_text(text) {
        let again = Graph::from_text(&g.to_text()).expect("printed graph parses");
        assert_eq!(g, again);
    }
});
