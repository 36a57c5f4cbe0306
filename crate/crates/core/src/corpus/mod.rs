//! Documents, constituency trees and coreference chains.
//!
//! Token indices (`Token::index`, `ParseNode` spans, `Mention` spans and
//! `ZeroPronoun::gap_index`) count every token in the sentence, including
//! empty elements such as `*pro*`. Encoders work on *surface* positions, which
//! skip all `-NONE-` tokens; [`Sentence::surface_position`] maps one to the
//! other.

mod conll;
mod embeddings;
pub mod synth;

mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

pub use conll::{parse_conll, parse_conll_str, write_conll};
pub use embeddings::{load_embeddings, EmbeddingMatrix};
pub use synth::{generate_synthetic, DistractorMode, SynthSpec};
pub use vocab::Vocab;

use crate::error::Error;

pub const ZP_FORM: &str = "*pro*";
pub const EMPTY_POS: &str = "-NONE-";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub pos: String,
    pub is_zp_placeholder: bool,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>, pos: impl Into<String>) -> Self {
        let form = form.into();
        let pos = pos.into();
        let is_zp_placeholder = form == ZP_FORM && pos == EMPTY_POS;
        Token {
            index,
            form,
            pos,
            is_zp_placeholder,
        }
    }

    /// Empty categories (`*pro*`, traces) have no surface form.
    pub fn is_empty_element(&self) -> bool {
        self.pos == EMPTY_POS
    }
}

/// Constituent over the token span `[start, end)`. Leaves are preterminals
/// labelled with the token's POS tag, one per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseNode {
    pub label: String,
    pub start: usize,
    pub end: usize,
    pub children: Vec<ParseNode>,
}

impl ParseNode {
    pub fn leaf(pos: impl Into<String>, index: usize) -> Self {
        ParseNode {
            label: pos.into(),
            start: index,
            end: index + 1,
            children: Vec::new(),
        }
    }

    pub fn phrase(label: impl Into<String>, children: Vec<ParseNode>) -> Self {
        let start = children.first().map_or(0, |c| c.start);
        let end = children.last().map_or(0, |c| c.end);
        ParseNode {
            label: label.into(),
            start,
            end,
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Label without function tags: `NP-SBJ` → `NP`. `-NONE-` is kept whole.
    pub fn base_label(&self) -> &str {
        base_label(&self.label)
    }

    pub fn has_function_tag(&self, tag: &str) -> bool {
        !self.label.starts_with('-') && self.label.split(['-', '=']).skip(1).any(|t| t == tag)
    }

    pub fn is_np(&self) -> bool {
        !self.is_leaf() && self.base_label() == "NP"
    }

    /// Node reached by following child indices from `self`.
    pub fn at_path(&self, path: &[usize]) -> Option<&ParseNode> {
        let mut node = self;
        for &i in path {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    /// Pre-order traversal yielding `(path, node)`.
    pub fn walk(&self) -> Vec<(Vec<usize>, &ParseNode)> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), self)];
        while let Some((path, node)) = stack.pop() {
            for (i, child) in node.children.iter().enumerate().rev() {
                let mut p = path.clone();
                p.push(i);
                stack.push((p, child));
            }
            out.push((path, node));
        }
        out
    }
}

pub(crate) fn base_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    label.split(['-', '=']).next().unwrap_or(label)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub tree: ParseNode,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Surface words, empty elements removed.
    pub fn words(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .filter(|t| !t.is_empty_element())
            .map(|t| t.form.as_str())
            .collect()
    }

    /// Number of surface words before token `index`.
    pub fn surface_position(&self, index: usize) -> usize {
        self.tokens[..index.min(self.tokens.len())]
            .iter()
            .filter(|t| !t.is_empty_element())
            .count()
    }

    /// Surface position of token `index` when it is itself a surface word.
    pub fn surface_index(&self, index: usize) -> Option<usize> {
        let t = self.tokens.get(index)?;
        (!t.is_empty_element()).then(|| self.surface_position(index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Genre {
    Nw,
    Mz,
    Wb,
    Bn,
    Bc,
    Tc,
    /// Synthetic documents.
    Syn,
}

impl Genre {
    pub const ALL: [Genre; 7] = [
        Genre::Nw,
        Genre::Mz,
        Genre::Wb,
        Genre::Bn,
        Genre::Bc,
        Genre::Tc,
        Genre::Syn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Genre::Nw => "NW",
            Genre::Mz => "MZ",
            Genre::Wb => "WB",
            Genre::Bn => "BN",
            Genre::Bc => "BC",
            Genre::Tc => "TC",
            Genre::Syn => "SYN",
        }
    }

    /// Genre from a document id such as `bc/cctv/00/cctv_0001`.
    pub fn from_doc_id(id: &str) -> Option<Genre> {
        id.split('/').next()?.parse().ok()
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Genre {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Genre::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown genre `{s}`")))
    }
}

/// A coreference mention: token span `[start, end)` of one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mention {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroPronoun {
    pub sentence_idx: usize,
    /// Token index of the `*pro*` placeholder.
    pub gap_index: usize,
    pub chain_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub part: u32,
    pub genre: Genre,
    pub sentences: Vec<Sentence>,
    pub chains: BTreeMap<u32, BTreeSet<Mention>>,
    pub zero_pronouns: Vec<ZeroPronoun>,
}

impl Document {
    /// Whether every token of the mention is an empty element.
    pub fn is_empty_mention(&self, m: &Mention) -> bool {
        self.sentences
            .get(m.sentence)
            .and_then(|s| s.tokens.get(m.start..m.end))
            .is_none_or(|toks| toks.iter().all(Token::is_empty_element))
    }

    /// Smallest chain id containing exactly this span.
    pub fn chain_of(&self, m: &Mention) -> Option<u32> {
        self.chains.iter().find(|(_, ms)| ms.contains(m)).map(|(&id, _)| id)
    }

    /// An AZP corefers with at least one overt mention ending before its gap.
    pub fn is_anaphoric(&self, zp: &ZeroPronoun) -> bool {
        let Some(chain) = zp.chain_id.and_then(|id| self.chains.get(&id)) else {
            return false;
        };
        chain.iter().any(|m| {
            let before = m.sentence < zp.sentence_idx || (m.sentence == zp.sentence_idx && m.end <= zp.gap_index);
            before && !self.is_empty_mention(m)
        })
    }

    pub fn anaphoric_zero_pronouns(&self) -> impl Iterator<Item = &ZeroPronoun> {
        self.zero_pronouns.iter().filter(|zp| self.is_anaphoric(zp))
    }

    /// Derives zero pronouns from `*pro*` placeholders and the chains.
    pub fn collect_zero_pronouns(&mut self) {
        let mut zps = Vec::new();
        for (s, sent) in self.sentences.iter().enumerate() {
            for tok in sent.tokens.iter().filter(|t| t.is_zp_placeholder) {
                let m = Mention {
                    sentence: s,
                    start: tok.index,
                    end: tok.index + 1,
                };
                zps.push(ZeroPronoun {
                    sentence_idx: s,
                    gap_index: tok.index,
                    chain_id: self.chain_of(&m),
                });
            }
        }
        self.zero_pronouns = zps;
    }
}
