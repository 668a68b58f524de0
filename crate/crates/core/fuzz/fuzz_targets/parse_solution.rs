#![no_main]

use libfuzzer_sys::fuzz_target;
use plank::format::{parse_solution, to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sol) = parse_solution(text) {
        assert_eq!(parse_solution(&to_json(&sol)).expect("re-parse"), sol);
    }
});
