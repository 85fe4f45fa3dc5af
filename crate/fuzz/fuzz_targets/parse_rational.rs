#![no_main]

use critlab::regimes::{classify, parse_rational, RegimeParams};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_rational(data);
    let mut parts = data.splitn(3, ' ');
    if let (Some(q), Some(a), Some(d)) = (parts.next(), parts.next(), parts.next()) {
        if let Ok(p) = RegimeParams::parse(2, q, a, d) {
            let _ = classify(&p);
        }
    }
});
