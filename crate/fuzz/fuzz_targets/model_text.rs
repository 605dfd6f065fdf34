//! Model files from untrusted sources: parsing must never panic, and an
//! accepted network must survive a write/parse round trip exactly.

#![no_main]

use gazebench::formats::model;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = model::parse_model(text) {
        let rendered = model::write_model(&net);
        let again = model::parse_model(&rendered).expect("written model must parse");
        assert_eq!(rendered, model::write_model(&again));
    }
});
