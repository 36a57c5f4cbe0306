//! The resolver network: zero pronoun encoder, local and global candidate
//! encoders, and the tanh scoring head followed by a softmax over candidates.

pub mod checkpoint;
mod config;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{Ablation, ContextWindow, ModelConfig, ZpCombine, LOCAL_BLOCKS};

use crate::candidates::{handcrafted_features, FeatureVector, NpSpan};
use crate::corpus::{Document, EmbeddingMatrix, Sentence, Vocab, ZeroPronoun};
use crate::error::{Error, Result};
use crate::nn::{argmax_last, lstm, mlp, LstmParams, MlpParams, ParamId, ParamStore, Tape, Tensor, Var};

/// Preceding/following single words fed to the local encoder.
const NEAR_WORDS: usize = 2;
/// Words averaged on each side of a candidate.
const AVG_WORDS: usize = 5;

pub const EMBEDDINGS: &str = "embeddings";
pub const UNK: &str = "unk";

/// All trainable tensors plus handles into them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    /// `[|V|, d]`: row `i` is the embedding column of word `i`.
    pub embeddings: ParamId,
    /// `[1, d]`
    pub unk: ParamId,
    pub lstm_pre: LstmParams,
    pub lstm_fol: LstmParams,
    pub local: MlpParams,
    pub global_fwd: LstmParams,
    pub global_bwd: LstmParams,
    /// `[1, scorer_input_dim]`
    pub scorer_w: ParamId,
    /// `[1]`
    pub scorer_b: ParamId,
}

impl ModelParams {
    /// Every entry drawn from U(-init_range, init_range); `pretrained`
    /// overrides the rows of words it covers.
    pub fn new_uniform(
        config: ModelConfig,
        vocab: Vocab,
        init_range: f64,
        seed: u64,
        pretrained: Option<&EmbeddingMatrix>,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        if let Some(m) = pretrained {
            if m.dim() != d {
                return Err(Error::dim("pretrained embeddings", d, m.dim()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embeddings = store.add_uniform(EMBEDDINGS, &[vocab.len(), d], init_range, &mut rng);
        if let Some(m) = pretrained {
            let table = store.get_mut(embeddings);
            for (i, w) in vocab.words().iter().enumerate() {
                if let Some(j) = m.index_of(w) {
                    table.data_mut()[i * d..(i + 1) * d].copy_from_slice(m.column(j));
                }
            }
        }
        let unk = store.add_uniform(UNK, &[1, d], init_range, &mut rng);
        let lstm_pre = LstmParams::register(&mut store, "lstm_pre", d, config.zp_hidden, init_range, &mut rng);
        let lstm_fol = LstmParams::register(&mut store, "lstm_fol", d, config.zp_hidden, init_range, &mut rng);
        let local = MlpParams::register(
            &mut store,
            "local",
            config.local_input_dim(),
            &config.local_hidden,
            init_range,
            &mut rng,
        );
        let gl_in = config.local_dim();
        let global_fwd = LstmParams::register(
            &mut store,
            "global_fwd",
            gl_in,
            config.global_hidden,
            init_range,
            &mut rng,
        );
        let global_bwd = LstmParams::register(
            &mut store,
            "global_bwd",
            gl_in,
            config.global_hidden,
            init_range,
            &mut rng,
        );
        let scorer_w = store.add_uniform("scorer.w", &[1, config.scorer_input_dim()], init_range, &mut rng);
        let scorer_b = store.add_uniform("scorer.b", &[1], init_range, &mut rng);
        Ok(ModelParams {
            config,
            vocab,
            store,
            embeddings,
            unk,
            lstm_pre,
            lstm_fol,
            local,
            global_fwd,
            global_bwd,
            scorer_w,
            scorer_b,
        })
    }

    /// Re-attaches handles to an existing store and checks every shape
    /// against `config`.
    pub fn from_store(config: ModelConfig, vocab: Vocab, store: ParamStore) -> Result<Self> {
        config.validate()?;
        let find = |name: &str| {
            store
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
        };
        let d = config.embedding_dim;
        let expect = |id: ParamId, shape: &[usize]| -> Result<()> {
            let got = store.get(id).shape();
            if got != shape {
                return Err(Error::dim(store.name(id), format!("{shape:?}"), format!("{got:?}")));
            }
            Ok(())
        };
        let embeddings = find(EMBEDDINGS)?;
        expect(embeddings, &[vocab.len(), d])?;
        let unk = find(UNK)?;
        expect(unk, &[1, d])?;
        let lstm_pre = LstmParams::lookup(&store, "lstm_pre")?;
        let lstm_fol = LstmParams::lookup(&store, "lstm_fol")?;
        for l in [&lstm_pre, &lstm_fol] {
            if (l.input_dim, l.hidden_dim) != (d, config.zp_hidden) {
                return Err(Error::dim(
                    "zp lstm",
                    format!("({d}, {})", config.zp_hidden),
                    format!("({}, {})", l.input_dim, l.hidden_dim),
                ));
            }
        }
        let local = MlpParams::lookup(&store, "local", 3)?;
        let widths: Vec<usize> = local.layers.iter().map(|&(w, _)| store.get(w).rows()).collect();
        if local.input_dim(&store) != config.local_input_dim() || widths != config.local_hidden {
            return Err(Error::dim(
                "local encoder",
                format!("{:?}", config.local_hidden),
                format!("{widths:?}"),
            ));
        }
        let global_fwd = LstmParams::lookup(&store, "global_fwd")?;
        let global_bwd = LstmParams::lookup(&store, "global_bwd")?;
        for l in [&global_fwd, &global_bwd] {
            if (l.input_dim, l.hidden_dim) != (config.local_dim(), config.global_hidden) {
                return Err(Error::dim("global lstm", config.global_hidden, l.hidden_dim));
            }
        }
        let scorer_w = find("scorer.w")?;
        expect(scorer_w, &[1, config.scorer_input_dim()])?;
        let scorer_b = find("scorer.b")?;
        expect(scorer_b, &[1])?;
        Ok(ModelParams {
            config,
            vocab,
            store,
            embeddings,
            unk,
            lstm_pre,
            lstm_fol,
            local,
            global_fwd,
            global_bwd,
            scorer_w,
            scorer_b,
        })
    }

    /// Embedding-table parameters (the word table and the unknown vector).
    pub fn is_embedding(&self, id: ParamId) -> bool {
        id == self.embeddings || id == self.unk
    }

    /// Current vector for `word` (unknown vector when out of vocabulary).
    pub fn word_vector(&self, word: &str) -> Tensor {
        let v = match self.vocab.get(word) {
            Some(i) => self.store.get(self.embeddings).row(i),
            None => self.store.get(self.unk).row(0),
        };
        Tensor::vector(v.to_vec())
    }
}

/// Records the embedding lookup of `word` on the tape.
pub fn embed(tape: &mut Tape<'_>, params: &ModelParams, word: &str) -> Result<Var> {
    match params.vocab.get(word) {
        Some(i) => tape.lookup(params.embeddings, i),
        None => tape.lookup(params.unk, 0),
    }
}

fn embed_all(tape: &mut Tape<'_>, params: &ModelParams, words: &[&str]) -> Result<Vec<Var>> {
    words.iter().map(|w| embed(tape, params, w)).collect()
}

/// Preceding and following surface contexts of the gap, limited by the
/// configured window and the sentence.
pub fn zp_contexts<'s>(
    sentence: &'s Sentence,
    zp: &ZeroPronoun,
    window: ContextWindow,
) -> (Vec<&'s str>, Vec<&'s str>) {
    let words = sentence.words();
    let gap = sentence.surface_position(zp.gap_index);
    let n = window.limit();
    let pre = words[gap.saturating_sub(n)..gap].to_vec();
    let fol = words[gap..gap.saturating_add(n).min(words.len())].to_vec();
    (pre, fol)
}

/// f(zp): the preceding context read left-to-right and the following context
/// read right-to-left, so the words next to the gap are consumed last.
pub fn encode_zp(tape: &mut Tape<'_>, params: &ModelParams, doc: &Document, zp: &ZeroPronoun) -> Result<Var> {
    let sentence = &doc.sentences[zp.sentence_idx];
    let (pre, fol) = zp_contexts(sentence, zp, params.config.context_window);
    let pre = embed_all(tape, params, &pre)?;
    let fol = embed_all(tape, params, &fol)?;
    let (_, last_pre) = lstm::run(tape, &params.lstm_pre, &pre, false)?;
    let (_, last_fol) = lstm::run(tape, &params.lstm_fol, &fol, true)?;
    Ok(match params.config.zp_combine {
        ZpCombine::Concat => tape.concat(&[last_pre, last_fol]),
        ZpCombine::Sum => tape.add(last_pre, last_fol)?,
        ZpCombine::Average => {
            let s = tape.add(last_pre, last_fol)?;
            tape.scale(s, 0.5)
        }
    })
}

/// The words feeding the local encoder, grouped by block. Positions outside
/// the sentence are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWords<'s> {
    pub head: &'s str,
    pub first: &'s str,
    pub last: &'s str,
    /// `[w-2, w-1]` relative to the first word.
    pub preceding: [Option<&'s str>; NEAR_WORDS],
    /// `[w+1, w+2]` relative to the last word.
    pub following: [Option<&'s str>; NEAR_WORDS],
    pub preceding_window: Vec<&'s str>,
    pub following_window: Vec<&'s str>,
    pub content: Vec<&'s str>,
}

pub fn local_words<'s>(sentence: &'s Sentence, np: &NpSpan) -> LocalWords<'s> {
    let words = sentence.words();
    let s0 = sentence.surface_position(np.start);
    let s1 = sentence.surface_position(np.end).max(s0 + 1).min(words.len());
    let head = sentence.surface_index(np.head_index).unwrap_or(s1 - 1);
    let at = |i: Option<usize>| i.and_then(|i| words.get(i).copied());
    LocalWords {
        head: words[head],
        first: words[s0],
        last: words[s1 - 1],
        preceding: [at(s0.checked_sub(2)), at(s0.checked_sub(1))],
        following: [at(Some(s1)), at(Some(s1 + 1))],
        preceding_window: words[s0.saturating_sub(AVG_WORDS)..s0].to_vec(),
        following_window: words[s1..(s1 + AVG_WORDS).min(words.len())].to_vec(),
        content: words[s0..s1].to_vec(),
    }
}

/// Input vector of the local encoder (`LOCAL_BLOCKS · d` entries).
pub fn local_input(tape: &mut Tape<'_>, params: &ModelParams, doc: &Document, np: &NpSpan) -> Result<Var> {
    let d = params.config.embedding_dim;
    let lw = local_words(&doc.sentences[np.sentence_idx], np);
    let mut blocks = Vec::with_capacity(LOCAL_BLOCKS);
    for w in [lw.head, lw.first, lw.last] {
        blocks.push(embed(tape, params, w)?);
    }
    for w in lw.preceding.iter().chain(&lw.following) {
        blocks.push(match w {
            Some(w) => embed(tape, params, w)?,
            None => tape.zeros(d),
        });
    }
    for group in [&lw.preceding_window, &lw.following_window, &lw.content] {
        let vars = embed_all(tape, params, group)?;
        blocks.push(tape.mean(&vars, d)?);
    }
    Ok(tape.concat(&blocks))
}

/// l(np): the ReLU MLP over the local input.
pub fn encode_local(tape: &mut Tape<'_>, params: &ModelParams, doc: &Document, np: &NpSpan) -> Result<Var> {
    let x = local_input(tape, params, doc, np)?;
    mlp::forward(tape, &params.local, x)
}

/// g_i(NP): forward and backward hidden states of the bidirectional LSTM over
/// the local representations in candidate order, concatenated per position.
pub fn encode_global(tape: &mut Tape<'_>, params: &ModelParams, locals: &[Var]) -> Result<Vec<Var>> {
    if locals.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let (fwd, _) = lstm::run(tape, &params.global_fwd, locals, false)?;
    let (mut bwd, _) = lstm::run(tape, &params.global_bwd, locals, true)?;
    bwd.reverse();
    Ok(fwd.into_iter().zip(bwd).map(|(f, b)| tape.concat(&[f, b])).collect())
}

/// s_i = tanh(W [f; l; g; v] + b), a one-element value.
pub fn score(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    f: Var,
    l: Var,
    g: Var,
    features: &FeatureVector,
) -> Result<Var> {
    let v = tape.input(features.0.clone());
    let x = tape.concat(&[f, l, g, v]);
    let z = tape.affine(params.scorer_w, x, Some(params.scorer_b))?;
    Ok(tape.tanh(z))
}

/// Tape handles of one forward pass over a candidate set.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub scores: Var,
    pub probs: Var,
}

pub fn forward(
    tape: &mut Tape<'_>,
    params: &ModelParams,
    doc: &Document,
    zp: &ZeroPronoun,
    candidates: &[NpSpan],
    features: &[FeatureVector],
    ablation: Ablation,
) -> Result<Forward> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if features.len() != candidates.len() {
        return Err(Error::dim("features", candidates.len(), features.len()));
    }
    let f = encode_zp(tape, params, doc, zp)?;
    let locals = candidates
        .iter()
        .map(|np| encode_local(tape, params, doc, np))
        .collect::<Result<Vec<_>>>()?;
    let globals = match ablation {
        Ablation::LocalOnly => None,
        _ => Some(encode_global(tape, params, &locals)?),
    };
    let cfg = &params.config;
    let mut scores = Vec::with_capacity(candidates.len());
    for (i, fv) in features.iter().enumerate() {
        let l = match ablation {
            Ablation::GlobalOnly => tape.zeros(cfg.local_dim()),
            _ => locals[i],
        };
        let g = match &globals {
            Some(gs) => gs[i],
            None => tape.zeros(cfg.global_dim()),
        };
        scores.push(score(tape, params, f, l, g, fv)?);
    }
    let scores = tape.concat(&scores);
    let probs = tape.softmax(scores)?;
    Ok(Forward { scores, probs })
}

pub fn candidate_features(zp: &ZeroPronoun, doc: &Document, candidates: &[NpSpan]) -> Vec<FeatureVector> {
    (0..candidates.len())
        .map(|i| handcrafted_features(zp, doc, candidates, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
    /// Highest-probability candidate; ties go to the nearest (last) one.
    pub predicted: usize,
}

/// Scores every candidate and picks the most probable antecedent.
pub fn resolve(
    params: &ModelParams,
    doc: &Document,
    zp: &ZeroPronoun,
    candidates: &[NpSpan],
    ablation: Ablation,
) -> Result<Resolution> {
    let features = candidate_features(zp, doc, candidates);
    resolve_with_features(params, doc, zp, candidates, &features, ablation)
}

pub fn resolve_with_features(
    params: &ModelParams,
    doc: &Document,
    zp: &ZeroPronoun,
    candidates: &[NpSpan],
    features: &[FeatureVector],
    ablation: Ablation,
) -> Result<Resolution> {
    let mut tape = Tape::new(&params.store);
    let out = forward(&mut tape, params, doc, zp, candidates, features, ablation)?;
    let probs = tape.value(out.probs).to_vec();
    let predicted = argmax_last(&probs).ok_or(Error::EmptyCandidates)?;
    Ok(Resolution {
        scores: tape.value(out.scores).to_vec(),
        probs,
        predicted,
    })
}
