#![no_main]

use libfuzzer_sys::fuzz_target;
use zpsnn::model::checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = checkpoint::decode(data) {
        // Anything accepted is canonical.
        assert_eq!(checkpoint::encode(&params), data);
    }
});
