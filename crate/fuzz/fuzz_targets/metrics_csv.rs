//! Path metrics CSV: parsing must never panic, and the writer's canonical
//! form must be a fixed point of parse + write.

#![no_main]

use gazebench::formats::csvio;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = csvio::metrics_from_csv(text) {
        let rendered = csvio::metrics_to_csv(&rows);
        let again = csvio::metrics_from_csv(&rendered).expect("written metrics must parse");
        assert_eq!(rendered, csvio::metrics_to_csv(&again));
    }
});
