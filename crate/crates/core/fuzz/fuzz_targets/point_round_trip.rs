#![no_main]

use libfuzzer_sys::fuzz_target;
use riemann_core::input::parse_point;

fuzz_target!(|coords: Vec<f64>| {
    let text = coords.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
    match parse_point(&text) {
        Ok(p) => assert_eq!(p, coords),
        Err(_) => assert!(coords.is_empty() || coords.iter().any(|v| !v.is_finite())),
    }
});
