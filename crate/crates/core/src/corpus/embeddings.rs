use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Pre-trained word vectors. Each word's vector is one column of the
/// `d × |V|` matrix; columns are stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f64>,
    unk: Vec<f64>,
}

pub fn load_embeddings(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_reader(BufReader::new(File::open(path)?), dim)
}

impl EmbeddingMatrix {
    pub fn new(dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            matrix: Vec::new(),
            unk: vec![0.0; dim],
        }
    }

    /// Reads the text format: a `|V| d` header line, then `word f1 … fd`.
    pub fn from_reader<R: BufRead>(reader: R, dim: usize) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Embedding { line, msg };
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => return Err(err(1, "missing header".into())),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [count, file_dim] = fields[..] else {
            return Err(err(1, format!("header must be `|V| d`, got `{header}`")));
        };
        let count: usize = count
            .parse()
            .map_err(|_| err(1, format!("bad vocabulary size `{count}`")))?;
        let file_dim: usize = file_dim
            .parse()
            .map_err(|_| err(1, format!("bad dimension `{file_dim}`")))?;
        if file_dim != dim {
            return Err(err(1, format!("dimension {file_dim} does not match configured {dim}")));
        }
        let mut m = EmbeddingMatrix::new(dim);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap_or_default();
            let mut vector = Vec::with_capacity(dim);
            for f in parts {
                let v: f64 = f.parse().map_err(|_| err(line_no, format!("malformed float `{f}`")))?;
                if !v.is_finite() {
                    return Err(err(line_no, format!("non-finite value `{f}`")));
                }
                vector.push(v);
            }
            if vector.len() != dim {
                return Err(err(line_no, format!("expected {dim} values, found {}", vector.len())));
            }
            if m.words.len() == count {
                return Err(err(line_no, format!("more than {count} vectors")));
            }
            m.insert(word, &vector)
                .map_err(|_| err(line_no, format!("duplicate word `{word}`")))?;
        }
        if m.words.len() != count {
            return Err(err(
                count + 1,
                format!("expected {count} vectors, found {}", m.words.len()),
            ));
        }
        Ok(m)
    }

    /// Adds a word; errors on duplicates or wrong length.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::dim(format!("embedding of `{word}`"), self.dim, vector.len()));
        }
        if self.index.contains_key(word) {
            return Err(Error::Embedding {
                line: 0,
                msg: format!("duplicate word `{word}`"),
            });
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.matrix.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn column(&self, idx: usize) -> &[f64] {
        &self.matrix[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn unk_vector(&self) -> &[f64] {
        &self.unk
    }

    pub fn set_unk_vector(&mut self, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::dim("unk vector", self.dim, v.len()));
        }
        self.unk = v;
        Ok(())
    }

    /// The word's column, or the unknown-word vector when out of vocabulary.
    pub fn lookup(&self, word: &str) -> Tensor {
        let v = match self.index_of(word) {
            Some(i) => self.column(i),
            None => &self.unk,
        };
        Tensor::vector(v.to_vec())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.words.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in self.column(i) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }
}
