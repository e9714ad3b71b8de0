#![no_main]

use libfuzzer_sys::fuzz_target;
use otlab_cli::parse_prob;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_prob(s) {
        // anything accepted must be a usable probability
        assert!(v.is_finite() && (0.0..=1.0).contains(&v));
    }
});
