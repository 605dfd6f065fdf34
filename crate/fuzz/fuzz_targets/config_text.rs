//! Key-value run configuration: parsing must never panic and rendering an
//! accepted map must parse back to the same map.

#![no_main]

use gazebench::formats::config::ParamMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = ParamMap::parse(text) {
        let rendered = map.render();
        let again = ParamMap::parse(&rendered).expect("rendered config must parse");
        assert_eq!(map, again);
    }
});
