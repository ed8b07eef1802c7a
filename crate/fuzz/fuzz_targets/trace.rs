#![no_main]

use libfuzzer_sys::fuzz_target;
use linmon::textfmt::{parse_trace, write_trace};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = parse_trace(text) {
        assert_eq!(parse_trace(&write_trace(&trace)).unwrap(), trace);
    }
});
