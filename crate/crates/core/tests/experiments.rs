use std::fs;
use std::path::Path;

use orbit_core::experiment::SweepConfig;

#[test]
fn checked_in_experiments_expand_to_valid_cells() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = SweepConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let cells = cfg.cells().unwrap();
        assert!(!cells.is_empty(), "{}", path.display());
        for c in &cells {
            c.config.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            c.model.generate(c.n, c.seed).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
        seen += 1;
    }
    assert!(seen >= 10);
}
