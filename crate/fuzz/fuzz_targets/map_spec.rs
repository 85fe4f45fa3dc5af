#![no_main]

use critlab::mapspec::MapSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(spec) = MapSpec::from_json(data) else { return };
    let text = spec.to_json().expect("parsed specs serialize");
    let back = MapSpec::from_json(&text).expect("serialized specs parse");
    assert_eq!(spec.digest().ok(), back.digest().ok());
    if let Ok(map) = spec.build() {
        let x = vec![0.25; map.dim()];
        let _ = map.jet(&x);
    }
});
