#![no_main]

use critlab::regimes::RangeSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(r) = RangeSpec::parse(data) {
        if let Ok(v) = r.values() {
            assert!(v.first() == Some(&r.lo));
            assert!(v.iter().all(|x| *x <= r.hi));
        }
    }
});
