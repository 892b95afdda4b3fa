#![no_main]

use libfuzzer_sys::fuzz_target;
use riemann_core::input::parse_point;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = parse_point(text) {
            assert!(!p.is_empty());
            assert!(p.iter().all(|v| v.is_finite()));
        }
    }
});
