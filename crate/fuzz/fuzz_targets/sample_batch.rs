#![no_main]

use libfuzzer_sys::fuzz_target;
use otlab::primitives::{format_batch, parse_batch};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(samples) = parse_batch(s) {
        let reparsed = parse_batch(&format_batch(&samples)).expect("own output reparses");
        assert_eq!(reparsed, samples);
    }
});
