//! Trial table CSV: parsing must never panic, and the writer's canonical
//! form must be a fixed point of parse + write.

#![no_main]

use gazebench::formats::csvio;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = csvio::trials_from_csv(text) {
        let rendered = csvio::trials_to_csv(&rows);
        let again = csvio::trials_from_csv(&rendered).expect("written trials must parse");
        assert_eq!(rendered, csvio::trials_to_csv(&again));
    }
});
