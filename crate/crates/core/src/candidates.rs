//! Candidate antecedent extraction, head finding, hand-crafted features and
//! gold labels.

use std::collections::BTreeSet;

use crate::corpus::{Document, Mention, ParseNode, Sentence, ZeroPronoun};

/// Sentences before the AZP's own sentence that are searched for candidates.
pub const SENTENCE_WINDOW: usize = 2;

pub const FEATURE_SCHEMA_VERSION: &str = "v1";
pub const FEATURE_DIM: usize = 12;

/// Feature names in vector order for schema v1.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "dist_0",
    "dist_1",
    "dist_2",
    "np_is_pronoun",
    "np_is_subject",
    "np_is_object",
    "np_length",
    "rank_over_k",
    "np_is_closest",
    "zp_sentence_initial",
    "zp_has_following_verb",
    "head_matches_other",
];

/// A candidate antecedent: an NP constituent of one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpSpan {
    pub sentence_idx: usize,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub head_index: usize,
    pub chain_id: Option<u32>,
    /// Child indices from the sentence root to the NP node.
    pub path: Vec<usize>,
}

impl NpSpan {
    pub fn mention(&self) -> Mention {
        Mention {
            sentence: self.sentence_idx,
            start: self.start,
            end: self.end,
        }
    }

    pub fn key(&self) -> (usize, usize, usize) {
        (self.sentence_idx, self.start, self.end)
    }

    pub fn node<'d>(&self, doc: &'d Document) -> Option<&'d ParseNode> {
        doc.sentences.get(self.sentence_idx)?.tree.at_path(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Maximal NPs (no NP ancestor) and modifier NPs (parent is an NP) from the
/// AZP's sentence and the two before it, ending before the gap, in textual
/// order `(sentence, start, end)`.
pub fn extract_candidates(zp: &ZeroPronoun, doc: &Document) -> Vec<NpSpan> {
    let first = zp.sentence_idx.saturating_sub(SENTENCE_WINDOW);
    let last = zp.sentence_idx.min(doc.sentences.len().saturating_sub(1));
    let mut out: Vec<NpSpan> = Vec::new();
    let mut seen = BTreeSet::new();
    if doc.sentences.is_empty() {
        return out;
    }
    for s in first..=last {
        let sent = &doc.sentences[s];
        let limit = if s == zp.sentence_idx { zp.gap_index } else { usize::MAX };
        let mut path = Vec::new();
        collect(&sent.tree, sent, false, false, &mut path, &mut |node, path| {
            if node.end > limit || !seen.insert((s, node.start, node.end)) {
                return;
            }
            let mention = Mention {
                sentence: s,
                start: node.start,
                end: node.end,
            };
            out.push(NpSpan {
                sentence_idx: s,
                start: node.start,
                end: node.end,
                head_index: find_head(node, sent),
                chain_id: doc.chain_of(&mention),
                path: path.to_vec(),
            });
        });
    }
    out.sort_by_key(NpSpan::key);
    out
}

fn collect(
    node: &ParseNode,
    sent: &Sentence,
    np_ancestor: bool,
    parent_np: bool,
    path: &mut Vec<usize>,
    emit: &mut dyn FnMut(&ParseNode, &[usize]),
) {
    let is_np = node.is_np();
    if is_np && (!np_ancestor || parent_np) && has_surface_token(node, sent) {
        emit(node, path);
    }
    for (i, child) in node.children.iter().enumerate() {
        path.push(i);
        collect(child, sent, np_ancestor || is_np, is_np, path, emit);
        path.pop();
    }
}

fn has_surface_token(node: &ParseNode, sent: &Sentence) -> bool {
    sent.tokens
        .get(node.start..node.end)
        .is_some_and(|t| t.iter().any(|t| !t.is_empty_element()))
}

/// Rightmost noun-tagged (POS starting with `N`) token in the NP, else the
/// rightmost surface token, else the last token.
pub fn find_head(np: &ParseNode, sentence: &Sentence) -> usize {
    let span = np.start..np.end.min(sentence.len());
    let tokens = &sentence.tokens[span.clone()];
    tokens
        .iter()
        .rev()
        .find(|t| !t.is_empty_element() && t.pos.starts_with('N'))
        .or_else(|| tokens.iter().rev().find(|t| !t.is_empty_element()))
        .map_or(np.end.saturating_sub(1), |t| t.index)
}

/// Gold indicator: both carry the same chain id.
pub fn label(zp: &ZeroPronoun, np: &NpSpan) -> bool {
    matches!((zp.chain_id, np.chain_id), (Some(a), Some(b)) if a == b)
}

pub fn gold_vector(zp: &ZeroPronoun, candidates: &[NpSpan]) -> Vec<f64> {
    candidates
        .iter()
        .map(|np| if label(zp, np) { 1.0 } else { 0.0 })
        .collect()
}

/// Feature vector (schema v1, see [`FEATURE_NAMES`]) for `candidates[index]`.
/// `candidate_rank` is the 1-based textual position, so the closest
/// candidate has rank `k`.
pub fn handcrafted_features(zp: &ZeroPronoun, doc: &Document, candidates: &[NpSpan], index: usize) -> FeatureVector {
    let np = &candidates[index];
    let k = candidates.len();
    let mut v = vec![0.0; FEATURE_DIM];

    let distance = zp.sentence_idx.saturating_sub(np.sentence_idx).min(2);
    v[distance] = 1.0;

    let np_sent = &doc.sentences[np.sentence_idx];
    v[3] = flag(np_sent.tokens.get(np.head_index).is_some_and(|t| t.pos == "PN"));
    v[4] = flag(is_subject(np_sent, &np.path));
    v[5] = flag(is_object(np_sent, &np.path));
    let length = np_sent.tokens[np.start..np.end]
        .iter()
        .filter(|t| !t.is_empty_element())
        .count();
    v[6] = length.min(8) as f64 / 8.0;
    v[7] = (index + 1) as f64 / k as f64;
    v[8] = flag(index + 1 == k);

    let zp_sent = &doc.sentences[zp.sentence_idx];
    v[9] = flag(zp_sent.surface_position(zp.gap_index) == 0);
    v[10] = flag(
        zp_sent.tokens[zp.gap_index.min(zp_sent.len())..]
            .iter()
            .filter(|t| !t.is_empty_element())
            .take(3)
            .any(|t| t.pos.starts_with('V')),
    );
    let head_form = |c: &NpSpan| {
        doc.sentences[c.sentence_idx]
            .tokens
            .get(c.head_index)
            .map(|t| t.form.as_str())
    };
    let own = head_form(np);
    v[11] = flag(
        candidates
            .iter()
            .enumerate()
            .any(|(j, c)| j != index && head_form(c) == own),
    );
    FeatureVector(v)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn parent_and_index<'t>(sent: &'t Sentence, path: &[usize]) -> Option<(&'t ParseNode, usize)> {
    let (&last, parent_path) = path.split_last()?;
    Some((sent.tree.at_path(parent_path)?, last))
}

/// `-SBJ` tagged, or an NP child of an IP followed by a VP sibling.
fn is_subject(sent: &Sentence, path: &[usize]) -> bool {
    let Some(node) = sent.tree.at_path(path) else {
        return false;
    };
    if node.has_function_tag("SBJ") {
        return true;
    }
    let Some((parent, i)) = parent_and_index(sent, path) else {
        return false;
    };
    parent.base_label() == "IP" && parent.children[i + 1..].iter().any(|c| c.base_label() == "VP")
}

/// `-OBJ` tagged, or an NP child of a VP preceded by a verb sibling.
fn is_object(sent: &Sentence, path: &[usize]) -> bool {
    let Some(node) = sent.tree.at_path(path) else {
        return false;
    };
    if node.has_function_tag("OBJ") {
        return true;
    }
    let Some((parent, i)) = parent_and_index(sent, path) else {
        return false;
    };
    parent.base_label() == "VP"
        && parent.children[..i]
            .iter()
            .any(|c| c.is_leaf() && c.label.starts_with('V'))
}
