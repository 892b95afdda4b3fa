#![no_main]

use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;
use riemann_core::input::parse_metric_file;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = parse_metric_file(text) else {
        return;
    };
    if let Ok(metric) = file.build("fuzz", &BTreeMap::new()) {
        let p = vec![0.5; metric.dim()];
        let _ = metric.metric_at(&p);
    }
});
