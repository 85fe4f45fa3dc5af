#![no_main]

use critlab::mapspec::parse_point;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(p) = parse_point(data) {
        assert!(!p.is_empty() && p.iter().all(|v| v.is_finite()));
    }
});
