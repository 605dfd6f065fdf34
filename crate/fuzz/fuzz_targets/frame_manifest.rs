//! Frame manifest parsing must never panic, and the writer's canonical
//! form must be a fixed point of parse + write.

#![no_main]

use gazebench::formats::records;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = records::parse_frame_manifest(text) {
        let rendered = records::write_frame_manifest(&parsed);
        let again = records::parse_frame_manifest(&rendered).expect("writer output must parse");
        assert_eq!(rendered, records::write_frame_manifest(&again));
    }
});
