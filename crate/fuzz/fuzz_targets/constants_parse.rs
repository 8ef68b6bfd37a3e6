#![no_main]

use anisodiff::constants::Constants;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Constants::from_json_str(text) {
        assert_eq!(Constants::from_json_str(&c.to_json()).unwrap(), c);
    }
});
