//! Binary PGM decoding must never panic, and anything it accepts must
//! survive an encode/decode round trip unchanged.

#![no_main]

use gazebench::formats::pgm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = pgm::decode(data) {
        let bytes = pgm::encode(&img);
        let again = pgm::decode(&bytes).expect("encoder output must decode");
        assert_eq!(img, again);
    }
});
