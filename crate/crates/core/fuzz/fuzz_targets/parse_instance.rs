#![no_main]

use libfuzzer_sys::fuzz_target;
use plank::format::{parse_instance, to_json, Instance, InstanceFile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Anything accepted must survive a write/read cycle unchanged.
    if let Ok(Instance::Matrix(sys)) = parse_instance(text) {
        let again = parse_instance(&to_json(&InstanceFile::from_system(&sys))).expect("re-parse");
        assert_eq!(again, Instance::Matrix(sys));
    }
});
