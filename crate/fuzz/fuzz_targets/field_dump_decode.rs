#![no_main]

use anisodiff::solver::dump::{decode_binary, encode_binary};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(dump) = decode_binary(data) else { return };
    let lower = vec![0.0; dump.counts.len()];
    if let Ok(field) = dump.into_field(&lower) {
        let again = decode_binary(&encode_binary(&field)).expect("re-encoded dump decodes");
        assert_eq!(again.counts, field.grid.counts());
    }
});
