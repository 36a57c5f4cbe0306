use std::collections::{BTreeSet, HashMap};

use super::Document;

/// Word → row index into the trainable embedding table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::default();
        for w in words {
            let w = w.into();
            if !v.index.contains_key(&w) {
                v.index.insert(w.clone(), v.words.len());
                v.words.push(w);
            }
        }
        v
    }

    /// Sorted set of surface words across `docs`.
    pub fn from_documents(docs: &[Document]) -> Self {
        let set: BTreeSet<&str> = docs
            .iter()
            .flat_map(|d| d.sentences.iter())
            .flat_map(|s| s.words())
            .collect();
        Vocab::from_words(set)
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
