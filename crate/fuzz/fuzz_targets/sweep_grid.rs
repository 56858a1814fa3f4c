#![no_main]

use colcert::cli_io::SweepGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = SweepGrid::from_toml_str(text) {
            assert!(!grid.points.is_empty());
        }
    }
});
