#![no_main]

use libfuzzer_sys::fuzz_target;
use zpsnn::corpus::{parse_conll_str, write_conll};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(docs) = parse_conll_str(text) else {
        return;
    };
    let reparsed = parse_conll_str(&write_conll(&docs)).expect("serialized corpus parses");
    assert_eq!(docs, reparsed);
});
