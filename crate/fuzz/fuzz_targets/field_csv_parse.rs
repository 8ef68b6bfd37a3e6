#![no_main]

use anisodiff::solver::dump::read_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = read_csv(data) {
        assert_eq!(d.indices.len(), d.values.len());
        assert_eq!(d.coords.len(), d.values.len());
    }
});
