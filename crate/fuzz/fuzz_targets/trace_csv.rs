//! Cursor trace CSV: parsing must never panic, and the writer's canonical
//! form must be a fixed point of parse + write.

#![no_main]

use gazebench::formats::csvio;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = csvio::trace_from_csv(text) {
        let rendered = csvio::trace_to_csv(&trace);
        let again = csvio::trace_from_csv(&rendered).expect("written trace must parse");
        assert_eq!(rendered, csvio::trace_to_csv(&again));
    }
});
