#![no_main]

use libfuzzer_sys::fuzz_target;
use riemann_core::expr::parse_expr;

const VARS: [&str; 6] = ["x", "y", "t", "r", "th", "ph"];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(e) = parse_expr(text, &VARS) else {
        return;
    };
    let printed = e.to_string();
    let again = parse_expr(&printed, &VARS).expect("printed expression parses");
    assert_eq!(again.to_string(), printed);
    let _ = e.diff("x");
    let _ = e.eval(&[("x", 0.3), ("y", 0.7), ("t", 0.0), ("r", 1.5), ("th", 1.1), ("ph", 0.2)]);
});
