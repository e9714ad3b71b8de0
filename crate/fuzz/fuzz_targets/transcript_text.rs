#![no_main]

use libfuzzer_sys::fuzz_target;
use otlab::engine::{parse_transcript, serialize_transcript, Transcript};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(lines) = parse_transcript(s) {
        let t = Transcript {
            lines: lines.clone(),
            view_a: vec![],
            view_b: vec![],
            output_a: None,
            output_b: None,
        };
        let reparsed = parse_transcript(&serialize_transcript(&t)).expect("own output reparses");
        assert_eq!(reparsed, lines);
    }
});
