#![no_main]

use libfuzzer_sys::fuzz_target;
use riemann_core::input::parse_params;

// One `--param` argument per line.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let items: Vec<&str> = text.lines().collect();
        if let Ok(map) = parse_params(&items) {
            assert!(map.values().all(|v| v.is_finite()));
        }
    }
});
