use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Document, Genre, Mention, ParseNode, Sentence, Token};
use crate::error::{Error, Result};

const BEGIN: &str = "#begin document";
const END: &str = "#end document";

pub fn parse_conll(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path)?;
    parse_conll_str(&text)
}

/// Parses CoNLL-2012 style text. Columns: doc id, part, token index, form,
/// POS, parse bit, then (optionally further columns and) the coreference
/// column last.
pub fn parse_conll_str(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut current: Option<DocBuilder> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix(BEGIN) {
            if current.is_some() {
                return Err(Error::parse(line_no, "nested #begin document"));
            }
            let (id, part) = parse_header(rest, line_no)?;
            current = Some(DocBuilder::new(id, part, line_no)?);
        } else if line.starts_with(END) {
            let Some(mut b) = current.take() else {
                return Err(Error::parse(line_no, "#end document without #begin"));
            };
            b.finish_sentence(line_no)?;
            docs.push(b.build());
        } else if line.is_empty() {
            if let Some(b) = current.as_mut() {
                b.finish_sentence(line_no)?;
            }
        } else if line.starts_with('#') {
            continue;
        } else {
            let Some(b) = current.as_mut() else {
                return Err(Error::parse(line_no, "token line outside a document"));
            };
            b.token_line(line, line_no)?;
        }
    }
    if current.is_some() {
        return Err(Error::parse(text.lines().count(), "missing #end document"));
    }
    Ok(docs)
}

fn parse_header(rest: &str, line_no: usize) -> Result<(String, u32)> {
    let rest = rest.trim();
    let (id, tail) = if let Some(inner) = rest.strip_prefix('(') {
        let close = inner
            .find(')')
            .ok_or_else(|| Error::parse(line_no, "unterminated document id"))?;
        (&inner[..close], &inner[close + 1..])
    } else {
        match rest.find(';') {
            Some(p) => (&rest[..p], &rest[p..]),
            None => (rest, ""),
        }
    };
    let id = id.trim();
    if id.is_empty() || id.contains(char::is_whitespace) {
        return Err(Error::parse(line_no, "invalid document id"));
    }
    let tail = tail.trim().trim_start_matches(';').trim();
    let part = match tail.strip_prefix("part") {
        Some(n) => n
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad part number `{}`", n.trim())))?,
        None if tail.is_empty() => 0,
        None => return Err(Error::parse(line_no, format!("unexpected header text `{tail}`"))),
    };
    Ok((id.to_string(), part))
}

struct DocBuilder {
    id: String,
    part: u32,
    genre: Genre,
    sentences: Vec<Sentence>,
    chains: BTreeMap<u32, BTreeSet<Mention>>,
    // Per-sentence state.
    tokens: Vec<Token>,
    open_nodes: Vec<ParseNode>,
    root: Option<ParseNode>,
    open_mentions: Vec<(u32, usize)>,
}

impl DocBuilder {
    fn new(id: String, part: u32, line_no: usize) -> Result<Self> {
        let genre = Genre::from_doc_id(&id)
            .ok_or_else(|| Error::parse(line_no, format!("cannot derive genre from document id `{id}`")))?;
        Ok(DocBuilder {
            id,
            part,
            genre,
            sentences: Vec::new(),
            chains: BTreeMap::new(),
            tokens: Vec::new(),
            open_nodes: Vec::new(),
            root: None,
            open_mentions: Vec::new(),
        })
    }

    fn token_line(&mut self, line: &str, line_no: usize) -> Result<()> {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 7 {
            return Err(Error::parse(
                line_no,
                format!("expected at least 7 columns, found {}", cols.len()),
            ));
        }
        if cols[0] != self.id {
            return Err(Error::parse(
                line_no,
                format!("document id `{}` does not match header `{}`", cols[0], self.id),
            ));
        }
        let part: u32 = cols[1]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad part number `{}`", cols[1])))?;
        if part != self.part {
            return Err(Error::parse(
                line_no,
                format!("part {part} does not match header part {}", self.part),
            ));
        }
        let index: usize = cols[2]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad token index `{}`", cols[2])))?;
        if index != self.tokens.len() {
            return Err(Error::parse(
                line_no,
                format!("non-contiguous token index {index}, expected {}", self.tokens.len()),
            ));
        }
        let token = Token::new(index, cols[3], cols[4]);
        self.parse_bit(cols[5], &token, line_no)?;
        self.coref(cols[cols.len() - 1], index, line_no)?;
        self.tokens.push(token);
        Ok(())
    }

    fn parse_bit(&mut self, bit: &str, token: &Token, line_no: usize) -> Result<()> {
        let star = bit
            .find('*')
            .ok_or_else(|| Error::parse(line_no, format!("parse bit `{bit}` has no `*`")))?;
        let (opens, closes) = (&bit[..star], &bit[star + 1..]);
        if !closes.chars().all(|c| c == ')') {
            return Err(Error::parse(line_no, format!("malformed parse bit `{bit}`")));
        }
        if !opens.is_empty() {
            let Some(body) = opens.strip_prefix('(') else {
                return Err(Error::parse(line_no, format!("malformed parse bit `{bit}`")));
            };
            for label in body.split('(') {
                if label.is_empty() || label.contains([')', '*']) {
                    return Err(Error::parse(line_no, format!("malformed parse bit `{bit}`")));
                }
                if self.root.is_some() {
                    return Err(Error::parse(line_no, "constituent after the sentence root closed"));
                }
                self.open_nodes.push(ParseNode {
                    label: label.to_string(),
                    start: token.index,
                    end: token.index,
                    children: Vec::new(),
                });
            }
        }
        let Some(parent) = self.open_nodes.last_mut() else {
            return Err(Error::parse(line_no, "token outside any constituent"));
        };
        parent.children.push(ParseNode::leaf(token.pos.clone(), token.index));
        for _ in 0..closes.len() {
            let Some(mut node) = self.open_nodes.pop() else {
                return Err(Error::parse(line_no, "unbalanced parse bits: too many `)`"));
            };
            node.end = token.index + 1;
            match self.open_nodes.last_mut() {
                Some(parent) => parent.children.push(node),
                None => self.root = Some(node),
            }
        }
        Ok(())
    }

    fn coref(&mut self, col: &str, index: usize, line_no: usize) -> Result<()> {
        if col == "-" {
            return Ok(());
        }
        let sentence = self.sentences.len();
        for piece in col.split('|') {
            let opens = piece.starts_with('(');
            let closes = piece.ends_with(')');
            let digits = piece.trim_start_matches('(').trim_end_matches(')');
            let bad = || Error::parse(line_no, format!("malformed coref entry `{piece}`"));
            if !(opens || closes) || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            if piece.len() != digits.len() + usize::from(opens) + usize::from(closes) {
                return Err(bad());
            }
            let chain: u32 = digits.parse().map_err(|_| bad())?;
            match (opens, closes) {
                (true, true) => self.add_mention(chain, sentence, index, index + 1),
                (true, false) => self.open_mentions.push((chain, index)),
                (false, true) => {
                    let pos = self
                        .open_mentions
                        .iter()
                        .rposition(|&(c, _)| c == chain)
                        .ok_or_else(|| Error::parse(line_no, format!("coref `{piece}` closes an unopened mention")))?;
                    let (_, start) = self.open_mentions.remove(pos);
                    self.add_mention(chain, sentence, start, index + 1);
                }
                (false, false) => unreachable!(),
            }
        }
        Ok(())
    }

    fn add_mention(&mut self, chain: u32, sentence: usize, start: usize, end: usize) {
        self.chains
            .entry(chain)
            .or_default()
            .insert(Mention { sentence, start, end });
    }

    fn finish_sentence(&mut self, line_no: usize) -> Result<()> {
        if self.tokens.is_empty() {
            if !self.open_nodes.is_empty() || self.root.is_some() {
                return Err(Error::parse(line_no, "dangling constituent"));
            }
            return Ok(());
        }
        if !self.open_nodes.is_empty() {
            return Err(Error::parse(line_no, "unbalanced parse bits: unclosed constituent"));
        }
        if let Some(&(chain, _)) = self.open_mentions.first() {
            return Err(Error::parse(
                line_no,
                format!("unclosed coref mention for chain {chain}"),
            ));
        }
        let tree = self
            .root
            .take()
            .ok_or_else(|| Error::parse(line_no, "sentence without a parse tree"))?;
        self.sentences.push(Sentence {
            tokens: std::mem::take(&mut self.tokens),
            tree,
        });
        Ok(())
    }

    fn build(self) -> Document {
        let mut doc = Document {
            id: self.id,
            part: self.part,
            genre: self.genre,
            sentences: self.sentences,
            chains: self.chains,
            zero_pronouns: Vec::new(),
        };
        doc.collect_zero_pronouns();
        doc
    }
}

/// Serializes documents to the 7-column format read by [`parse_conll_str`].
pub fn write_conll(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        let _ = writeln!(out, "{BEGIN} ({}); part {:03}", doc.id, doc.part);
        for (s, sent) in doc.sentences.iter().enumerate() {
            let mut opens: Vec<Vec<&str>> = vec![Vec::new(); sent.len()];
            let mut closes = vec![0usize; sent.len()];
            for (_, node) in sent.tree.walk() {
                if node.is_leaf() || node.end == 0 || node.start >= sent.len() || node.end > sent.len() {
                    continue;
                }
                opens[node.start].push(&node.label);
                closes[node.end - 1] += 1;
            }
            for (i, tok) in sent.tokens.iter().enumerate() {
                let mut bit = String::new();
                for label in &opens[i] {
                    bit.push('(');
                    bit.push_str(label);
                }
                bit.push('*');
                bit.extend(std::iter::repeat_n(')', closes[i]));
                let _ = writeln!(
                    out,
                    "{} {} {} {} {} {} {}",
                    doc.id,
                    doc.part,
                    tok.index,
                    tok.form,
                    tok.pos,
                    bit,
                    coref_cell(doc, s, i)
                );
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{END}");
    }
    out
}

fn coref_cell(doc: &Document, sentence: usize, index: usize) -> String {
    // Longer spans open first so that same-chain nesting closes innermost first.
    let mut starts: Vec<(usize, u32)> = Vec::new();
    let mut singles: Vec<u32> = Vec::new();
    let mut ends: Vec<(usize, u32)> = Vec::new();
    for (&chain, mentions) in &doc.chains {
        for m in mentions.iter().filter(|m| m.sentence == sentence) {
            if m.start == index && m.end == index + 1 {
                singles.push(chain);
            } else if m.start == index {
                starts.push((m.end, chain));
            } else if m.end == index + 1 {
                ends.push((m.start, chain));
            }
        }
    }
    starts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    // Later-opened (larger start) mentions close first.
    ends.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let parts: Vec<String> = starts
        .iter()
        .map(|(_, c)| format!("({c}"))
        .chain(singles.iter().map(|c| format!("({c})")))
        .chain(ends.iter().map(|(_, c)| format!("{c})")))
        .collect();
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join("|")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SENTENCES: &str = "\
#begin document (nw/xinhua/00/chtb_0001); part 000
nw/xinhua/00/chtb_0001 0 0 警方 NN (TOP(IP(NP*) (3)
nw/xinhua/00/chtb_0001 0 1 怀疑 VV (VP* -
nw/xinhua/00/chtb_0001 0 2 案件 NN (NP*)))) -

nw/xinhua/00/chtb_0001 0 0 *pro* -NONE- (TOP(IP(NP*) (3)
nw/xinhua/00/chtb_0001 0 1 将 AD (VP* -
nw/xinhua/00/chtb_0001 0 2 警方 NN (NP*)))) (3)

#end document
";

    #[test]
    fn empty_input_gives_no_documents() {
        assert!(parse_conll_str("").unwrap().is_empty());
    }

    #[test]
    fn two_sentence_fixture() {
        let docs = parse_conll_str(TWO_SENTENCES).unwrap();
        assert_eq!(docs.len(), 1);
        let d = &docs[0];
        assert_eq!(d.genre, Genre::Nw);
        assert_eq!(d.sentences.len(), 2);
        assert_eq!(d.chains[&3].len(), 3);
        assert_eq!(d.zero_pronouns.len(), 1);
        let zp = d.zero_pronouns[0];
        assert_eq!((zp.sentence_idx, zp.gap_index, zp.chain_id), (1, 0, Some(3)));
        assert!(d.is_anaphoric(&zp));
        assert_eq!(d.sentences[1].words(), vec!["将", "警方"]);
        assert_eq!(d.sentences[0].tree.label, "TOP");
        assert_eq!((d.sentences[0].tree.start, d.sentences[0].tree.end), (0, 3));
    }

    #[test]
    fn pro_without_coref_is_non_anaphoric() {
        let text = TWO_SENTENCES.replace("*pro* -NONE- (TOP(IP(NP*) (3)", "*pro* -NONE- (TOP(IP(NP*) -");
        let docs = parse_conll_str(&text).unwrap();
        let zp = docs[0].zero_pronouns[0];
        assert_eq!(zp.chain_id, None);
        assert!(!docs[0].is_anaphoric(&zp));
    }

    #[test]
    fn roundtrip_fixture() {
        let docs = parse_conll_str(TWO_SENTENCES).unwrap();
        let text = write_conll(&docs);
        assert_eq!(parse_conll_str(&text).unwrap(), docs);
    }

    fn error_line(text: &str) -> usize {
        match parse_conll_str(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unbalanced_parse_bits_report_line() {
        let text = TWO_SENTENCES.replace("(NP*)))) -", "(NP*))) -");
        assert_eq!(error_line(&text), 5);
        let text = TWO_SENTENCES.replace("(NP*)))) -", "(NP*))))) -");
        assert_eq!(error_line(&text), 4);
    }

    #[test]
    fn malformed_coref_reports_line() {
        let text = TWO_SENTENCES.replace("怀疑 VV (VP* -", "怀疑 VV (VP* 4)");
        assert_eq!(error_line(&text), 3);
        let text = TWO_SENTENCES.replace("怀疑 VV (VP* -", "怀疑 VV (VP* (4");
        assert_eq!(error_line(&text), 5);
        let text = TWO_SENTENCES.replace("怀疑 VV (VP* -", "怀疑 VV (VP* (x)");
        assert_eq!(error_line(&text), 3);
    }

    #[test]
    fn non_contiguous_index_reports_line() {
        let text = TWO_SENTENCES.replace("0 2 案件", "0 3 案件");
        assert_eq!(error_line(&text), 4);
    }

    #[test]
    fn header_variants() {
        assert_eq!(
            parse_header(" (bc/x/1); part 002", 1).unwrap(),
            ("bc/x/1".to_string(), 2)
        );
        assert_eq!(parse_header(" bc/x/1", 1).unwrap(), ("bc/x/1".to_string(), 0));
        assert!(parse_header(" ", 1).is_err());
    }

    #[test]
    fn nested_same_chain_mentions_roundtrip() {
        let text = "\
#begin document (bn/a/1); part 000
bn/a/1 0 0 a NN (TOP(NP(NP* (5|(5
bn/a/1 0 1 b NN *) 5)
bn/a/1 0 2 c NN *)) 5)

#end document
";
        let docs = parse_conll_str(text).unwrap();
        assert_eq!(docs[0].chains[&5].len(), 2);
        assert_eq!(parse_conll_str(&write_conll(&docs)).unwrap(), docs);
    }
}
