//! Calibration dataset CSV: parsing must never panic, and the writer's
//! canonical form must be a fixed point of parse + write.

#![no_main]

use gazebench::formats::csvio;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = csvio::dataset_from_csv(text) {
        let rendered = csvio::dataset_to_csv(&ds);
        let again = csvio::dataset_from_csv(&rendered).expect("written dataset must parse");
        assert_eq!(rendered, csvio::dataset_to_csv(&again));
    }
});
