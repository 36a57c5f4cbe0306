//! Replays the checked-in fuzz seed corpora through the fuzz targets'
//! properties, so they run under a plain `cargo test`.

use std::fs;
use std::path::PathBuf;

use zpsnn::config::RunConfig;
use zpsnn::corpus::{parse_conll_str, write_conll, EmbeddingMatrix};
use zpsnn::model::checkpoint;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn parse_conll_seeds() {
    let mut parsed = 0;
    for (path, bytes) in seeds("parse_conll") {
        let Ok(docs) = parse_conll_str(std::str::from_utf8(&bytes).unwrap()) else {
            continue;
        };
        assert_eq!(
            parse_conll_str(&write_conll(&docs)).unwrap(),
            docs,
            "{}",
            path.display()
        );
        parsed += 1;
    }
    assert!(parsed >= 4);
}

#[test]
fn load_embeddings_seeds() {
    let mut parsed = 0;
    for (_, bytes) in seeds("load_embeddings") {
        let (&dim, text) = bytes.split_first().unwrap();
        let dim = usize::from(dim % 8) + 1;
        let Ok(m) = EmbeddingMatrix::from_reader(text, dim) else {
            continue;
        };
        let again = EmbeddingMatrix::from_reader(m.to_text().as_bytes(), dim).unwrap();
        assert_eq!(m.words(), again.words());
        parsed += 1;
    }
    assert!(parsed >= 1);
}

#[test]
fn checkpoint_decode_seeds() {
    for (path, bytes) in seeds("checkpoint_decode") {
        let params = checkpoint::decode(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(checkpoint::encode(&params), bytes);
    }
}

#[test]
fn run_config_seeds() {
    for (path, bytes) in seeds("run_config") {
        let cfg = RunConfig::parse(std::str::from_utf8(&bytes).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
