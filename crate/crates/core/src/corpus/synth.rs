//! Synthetic pro-drop corpora in the same shape as parsed CoNLL documents.
//!
//! Word forms are ASCII codes by class: `p*` person nouns, `t*` thing nouns,
//! `v*` verbs, `a*` adverbial fillers, `c*` cue words.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Document, Genre, Mention, ParseNode, Sentence, Token, EMPTY_POS, ZP_FORM};
use crate::error::{Error, Result};

/// Filler words between a cue and anything it could be read from locally.
const FILLER_RUN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistractorMode {
    /// The antecedent is always the nearest preceding subject; the
    /// hand-crafted features separate it from every other candidate.
    #[default]
    Off,
    /// Two identical subject NPs precede each AZP. Which one is the
    /// antecedent depends on whether a cue NP elsewhere in the candidate set
    /// is present, and the cue sits outside every candidate's local window.
    Global,
    /// A cue word several tokens before the gap decides whether the
    /// antecedent is the previous sentence's subject or its object.
    LongRange,
}

impl DistractorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DistractorMode::Off => "off",
            DistractorMode::Global => "global",
            DistractorMode::LongRange => "long_range",
        }
    }
}

impl fmt::Display for DistractorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistractorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(DistractorMode::Off),
            "global" => Ok(DistractorMode::Global),
            "long_range" | "long-range" => Ok(DistractorMode::LongRange),
            _ => Err(Error::Config(format!("unknown distractor mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub sentences_per_doc: usize,
    /// Words per open class (persons, things, verbs, fillers).
    pub vocab_size: usize,
    pub distractor_mode: DistractorMode,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_docs: 50,
            sentences_per_doc: 8,
            vocab_size: 20,
            distractor_mode: DistractorMode::Off,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sentences_per_doc == 0 || self.vocab_size == 0 {
            return Err(Error::Config(
                "sentences_per_doc and vocab_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Generates `spec.n_docs` documents, deterministic in `seed`. Every AZP has
/// its antecedent among its candidates.
pub fn generate_synthetic(seed: u64, spec: &SynthSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = Lexicon::new(spec.vocab_size);
    Ok((0..spec.n_docs)
        .map(|i| {
            let mut b = DocBuilder::new(format!("syn/{seed}/{i:04}"));
            match spec.distractor_mode {
                DistractorMode::Off => separable_doc(&mut b, &lex, spec.sentences_per_doc, &mut rng),
                DistractorMode::Global => global_doc(&mut b, &lex, spec.sentences_per_doc, &mut rng),
                DistractorMode::LongRange => long_range_doc(&mut b, &lex, spec.sentences_per_doc, &mut rng),
            }
            b.finish()
        })
        .collect())
}

struct Lexicon {
    persons: Vec<String>,
    things: Vec<String>,
    verbs: Vec<String>,
    fillers: Vec<String>,
    cues: Vec<String>,
}

impl Lexicon {
    fn new(n: usize) -> Self {
        let class = |p: &str| (0..n).map(|i| format!("{p}{i}")).collect();
        Lexicon {
            persons: class("p"),
            things: class("t"),
            verbs: class("v"),
            fillers: class("a"),
            cues: vec!["c0".into(), "c1".into()],
        }
    }
}

fn pick<'a, R: Rng>(words: &'a [String], rng: &mut R) -> &'a str {
    words.choose(rng).expect("non-empty word class")
}

/// Token accumulator for one sentence.
#[derive(Default)]
struct SentenceBuilder {
    tokens: Vec<Token>,
}

impl SentenceBuilder {
    fn leaf(&mut self, form: &str, pos: &str) -> ParseNode {
        let i = self.tokens.len();
        self.tokens.push(Token::new(i, form, pos));
        ParseNode::leaf(pos, i)
    }

    fn np(&mut self, label: &str, form: &str, pos: &str) -> ParseNode {
        let leaf = self.leaf(form, pos);
        ParseNode::phrase(label, vec![leaf])
    }

    fn pro(&mut self) -> ParseNode {
        self.np("NP-SBJ", ZP_FORM, EMPTY_POS)
    }

    fn fillers<R: Rng>(&mut self, lex: &Lexicon, n: usize, rng: &mut R) -> ParseNode {
        let leaves = (0..n).map(|_| self.leaf(pick(&lex.fillers, rng), "AD")).collect();
        ParseNode::phrase("ADVP", leaves)
    }

    /// `(IP subj (VP (VV verb) (NP-OBJ (NN obj))))`
    fn clause(&mut self, subj: ParseNode, verb: &str, obj: &str) -> ParseNode {
        let v = self.leaf(verb, "VV");
        let o = self.np("NP-OBJ", obj, "NN");
        ParseNode::phrase("IP", vec![subj, ParseNode::phrase("VP", vec![v, o])])
    }

    fn finish(self, children: Vec<ParseNode>) -> Sentence {
        Sentence {
            tokens: self.tokens,
            tree: ParseNode::phrase("IP", children),
        }
    }
}

struct DocBuilder {
    id: String,
    sentences: Vec<Sentence>,
    chains: BTreeMap<u32, BTreeSet<Mention>>,
}

impl DocBuilder {
    fn new(id: String) -> Self {
        DocBuilder {
            id,
            sentences: Vec::new(),
            chains: BTreeMap::new(),
        }
    }

    fn next_index(&self) -> usize {
        self.sentences.len()
    }

    /// Links a zero pronoun to its antecedent in a fresh chain.
    fn link(&mut self, antecedent: Mention, zp: Mention) {
        let id = self.chains.len() as u32 + 1;
        self.chains.insert(id, BTreeSet::from([antecedent, zp]));
    }

    fn finish(self) -> Document {
        let mut doc = Document {
            id: self.id,
            part: 0,
            genre: Genre::Syn,
            sentences: self.sentences,
            chains: self.chains,
            zero_pronouns: Vec::new(),
        };
        doc.collect_zero_pronouns();
        doc
    }
}

fn span(sentence: usize, node: &ParseNode) -> Mention {
    Mention {
        sentence,
        start: node.start,
        end: node.end,
    }
}

/// `p v t 。`, returning the sentence and its subject mention.
fn plain_sentence<R: Rng>(b: &mut DocBuilder, lex: &Lexicon, rng: &mut R) -> Mention {
    let s = b.next_index();
    let mut sb = SentenceBuilder::default();
    let subj = sb.np("NP-SBJ", pick(&lex.persons, rng), "NN");
    let subj_span = span(s, &subj);
    let ip = sb.clause(subj, pick(&lex.verbs, rng), pick(&lex.things, rng));
    let pu = sb.leaf("。", "PU");
    b.sentences.push(sb.finish(vec![ip, pu]));
    subj_span
}

/// Alternates overt and AZP sentences. An AZP is either sentence-initial
/// (antecedent: previous sentence's subject) or follows an overt clause and
/// a comma in its own sentence (antecedent: that clause's subject).
fn separable_doc<R: Rng>(b: &mut DocBuilder, lex: &Lexicon, n: usize, rng: &mut R) {
    let mut last_subject = None;
    while b.next_index() < n {
        let s = b.next_index();
        let Some(prev) = last_subject.take() else {
            last_subject = Some(plain_sentence(b, lex, rng));
            continue;
        };
        let mut sb = SentenceBuilder::default();
        let mut children = Vec::new();
        let antecedent = if rng.random_bool(0.5) {
            prev
        } else {
            let subj = sb.np("NP-SBJ", pick(&lex.persons, rng), "NN");
            let m = span(s, &subj);
            children.push(sb.clause(subj, pick(&lex.verbs, rng), pick(&lex.things, rng)));
            children.push(sb.leaf("，", "PU"));
            m
        };
        let pro = sb.pro();
        let zp = span(s, &pro);
        children.push(sb.clause(pro, pick(&lex.verbs, rng), pick(&lex.things, rng)));
        children.push(sb.leaf("。", "PU"));
        b.sentences.push(sb.finish(children));
        b.link(antecedent, zp);
    }
}

/// `subj verb obj ， a a a a a a X v 。` with a twin subject/verb/object;
/// returns the subject mention.
fn twin_sentence<R: Rng>(b: &mut DocBuilder, lex: &Lexicon, twin: (&str, &str, &str), x: &str, rng: &mut R) -> Mention {
    let s = b.next_index();
    let mut sb = SentenceBuilder::default();
    let subj = sb.np("NP-SBJ", twin.0, "NN");
    let m = span(s, &subj);
    let first = sb.clause(subj, twin.1, twin.2);
    let comma = sb.leaf("，", "PU");
    let adv = sb.fillers(lex, FILLER_RUN, rng);
    let xs = sb.np("NP-SBJ", x, "NN");
    let xv = sb.leaf(pick(&lex.verbs, rng), "VV");
    let second = ParseNode::phrase("IP", vec![xs, ParseNode::phrase("VP", vec![xv])]);
    let end = sb.leaf("。", "PU");
    b.sentences.push(sb.finish(vec![first, comma, adv, second, end]));
    m
}

/// Blocks of three sentences: twin A, twin B, then a sentence-initial AZP.
/// Sentence A ends in the cue NP (antecedent: A's subject) or in a thing
/// noun (antecedent: B's subject), with equal probability.
fn global_doc<R: Rng>(b: &mut DocBuilder, lex: &Lexicon, n: usize, rng: &mut R) {
    while b.next_index() + 3 <= n {
        let twin = (pick(&lex.persons, rng), pick(&lex.verbs, rng), pick(&lex.things, rng));
        let cued = rng.random_bool(0.5);
        let x_a = if cued {
            lex.cues[0].as_str()
        } else {
            pick(&lex.things, rng)
        };
        let a = twin_sentence(b, lex, twin, x_a, rng);
        let x_b = pick(&lex.things, rng);
        let bb = twin_sentence(b, lex, twin, x_b, rng);
        let s = b.next_index();
        let mut sb = SentenceBuilder::default();
        let pro = sb.pro();
        let zp = span(s, &pro);
        let ip = sb.clause(pro, pick(&lex.verbs, rng), pick(&lex.things, rng));
        let pu = sb.leaf("。", "PU");
        b.sentences.push(sb.finish(vec![ip, pu]));
        b.link(if cued { a } else { bb }, zp);
    }
    while b.next_index() < n {
        plain_sentence(b, lex, rng);
    }
}

/// Pairs of an overt `p v t 。` sentence and `c a a ， *pro* v t 。`, where
/// cue `c0` points at the subject `p` and `c1` at the object `t`.
fn long_range_doc<R: Rng>(b: &mut DocBuilder, lex: &Lexicon, n: usize, rng: &mut R) {
    while b.next_index() + 2 <= n {
        let s = b.next_index();
        let mut sb = SentenceBuilder::default();
        let subj = sb.np("NP-SBJ", pick(&lex.persons, rng), "NN");
        let ip = sb.clause(subj, pick(&lex.verbs, rng), pick(&lex.things, rng));
        let subj_m = span(s, &ip.children[0]);
        let obj_m = span(s, &ip.children[1].children[1]);
        let pu = sb.leaf("。", "PU");
        b.sentences.push(sb.finish(vec![ip, pu]));

        let to_subject = rng.random_bool(0.5);
        let s = b.next_index();
        let mut sb = SentenceBuilder::default();
        let cue = sb.leaf(&lex.cues[usize::from(!to_subject)], "AD");
        let adv = sb.fillers(lex, 2, rng);
        let comma = sb.leaf("，", "PU");
        let pro = sb.pro();
        let zp = span(s, &pro);
        let ip = sb.clause(pro, pick(&lex.verbs, rng), pick(&lex.things, rng));
        let pu = sb.leaf("。", "PU");
        b.sentences
            .push(sb.finish(vec![ParseNode::phrase("ADVP", vec![cue]), adv, comma, ip, pu]));
        b.link(if to_subject { subj_m } else { obj_m }, zp);
    }
    while b.next_index() < n {
        plain_sentence(b, lex, rng);
    }
}
