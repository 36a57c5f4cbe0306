#![no_main]

use libfuzzer_sys::fuzz_target;
use zpsnn::corpus::EmbeddingMatrix;

fuzz_target!(|data: &[u8]| {
    let Some((&dim, text)) = data.split_first() else {
        return;
    };
    let dim = usize::from(dim % 8) + 1;
    let Ok(m) = EmbeddingMatrix::from_reader(text, dim) else {
        return;
    };
    let again = EmbeddingMatrix::from_reader(m.to_text().as_bytes(), dim).expect("serialized embeddings parse");
    assert_eq!(m.words(), again.words());
});
