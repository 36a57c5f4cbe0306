//! Instance construction, SGD training and evaluation.

mod metrics;
pub mod report;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use metrics::{Counts, Metrics};

use crate::candidates::{extract_candidates, gold_vector, FeatureVector, NpSpan};
use crate::corpus::{generate_synthetic, SynthSpec};
use crate::corpus::{Document, EmbeddingMatrix, Vocab, ZeroPronoun};
use crate::error::{Error, Result};
use crate::model::{self, Ablation, ContextWindow, ModelConfig, ModelParams};
use crate::nn::{
    argmax_last, grad_check, sgd_step_where, GradCheckOptions, GradCheckReport, Gradients, ParamStore, Tape,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub lr: f64,
    pub init_range: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Update the embedding table (including the unknown vector).
    pub fine_tune_embeddings: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.01,
            init_range: 0.01,
            epochs: 10,
            seed: 0,
            shuffle: true,
            fine_tune_embeddings: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return Err(Error::Config(format!(
                "init_range must be positive, got {}",
                self.init_range
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Drops AZPs without candidates or without a gold candidate.
    Train,
    /// Keeps every AZP; those without candidates count as recall misses.
    Eval,
}

/// One anaphoric zero pronoun with its candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Index into the document slice the instance was built from.
    pub doc: usize,
    pub zp: ZeroPronoun,
    pub candidates: Vec<NpSpan>,
    pub features: Vec<FeatureVector>,
    pub gold: Vec<f64>,
}

impl Instance {
    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    pub fn has_gold(&self) -> bool {
        self.gold.iter().any(|&g| g > 0.0)
    }

    fn describe(&self, docs: &[Document]) -> String {
        format!(
            "document {} sentence {} gap {}",
            docs[self.doc].id, self.zp.sentence_idx, self.zp.gap_index
        )
    }
}

pub fn build_instances(docs: &[Document], mode: Mode) -> Vec<Instance> {
    let mut out = Vec::new();
    let mut dropped = 0usize;
    for (d, doc) in docs.iter().enumerate() {
        for zp in doc.anaphoric_zero_pronouns() {
            let candidates = extract_candidates(zp, doc);
            let gold = gold_vector(zp, &candidates);
            let inst = Instance {
                doc: d,
                zp: *zp,
                features: model::candidate_features(zp, doc, &candidates),
                candidates,
                gold,
            };
            if mode == Mode::Train && (inst.k() == 0 || !inst.has_gold()) {
                dropped += 1;
                continue;
            }
            out.push(inst);
        }
    }
    if mode == Mode::Train {
        info!(
            "built {} training instances, dropped {dropped} without a reachable antecedent",
            out.len()
        );
    }
    out
}

/// Fresh parameters from U(-init_range, init_range) seeded by `hp.seed`.
pub fn init_params(
    cfg: &ModelConfig,
    hp: &Hyperparams,
    vocab: Vocab,
    pretrained: Option<&EmbeddingMatrix>,
) -> Result<ModelParams> {
    hp.validate()?;
    ModelParams::new_uniform(cfg.clone(), vocab, hp.init_range, hp.seed, pretrained)
}

/// Loss of one instance and its gradients.
pub fn instance_loss(
    params: &ModelParams,
    docs: &[Document],
    inst: &Instance,
    ablation: Ablation,
) -> Result<(f64, Gradients)> {
    loss_with_store(&params.store, params, docs, inst, ablation)
}

/// [`instance_loss`] with parameter values taken from `store` instead of
/// `params.store`; `store` must have the same layout.
pub fn loss_with_store(
    store: &ParamStore,
    params: &ModelParams,
    docs: &[Document],
    inst: &Instance,
    ablation: Ablation,
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(store);
    let out = model::forward(
        &mut tape,
        params,
        &docs[inst.doc],
        &inst.zp,
        &inst.candidates,
        &inst.features,
        ablation,
    )?;
    let loss = tape.cross_entropy(out.probs, &inst.gold)?;
    let value = tape.value(loss)[0];
    let grads = tape.backward(loss)?;
    Ok((value, grads))
}

/// Sum of per-instance cross-entropy losses.
pub fn total_loss(params: &ModelParams, docs: &[Document], instances: &[Instance], ablation: Ablation) -> Result<f64> {
    instances
        .iter()
        .map(|inst| {
            let r = model::resolve_with_features(
                params,
                &docs[inst.doc],
                &inst.zp,
                &inst.candidates,
                &inst.features,
                ablation,
            )?;
            crate::nn::cross_entropy(&r.probs, &inst.gold)
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean per-instance loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Per-instance SGD over `hp.epochs` epochs.
pub fn train(
    mut params: ModelParams,
    docs: &[Document],
    instances: &[Instance],
    hp: &Hyperparams,
    ablation: Ablation,
) -> Result<TrainOutcome> {
    hp.validate()?;
    if instances.is_empty() {
        return Err(Error::Config("no training instances".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x5eed_0f5e_u64);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        if hp.shuffle {
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        for &i in &order {
            let inst = &instances[i];
            let (loss, grads) = instance_loss(&params, docs, inst, ablation).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("{m} at {}", inst.describe(docs))),
                other => other,
            })?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!("loss {loss} at {}", inst.describe(docs))));
            }
            sum += loss;
            let embeddings = (params.embeddings, params.unk);
            let fine_tune = hp.fine_tune_embeddings;
            sgd_step_where(&mut params.store, &grads, hp.lr, |id| {
                fine_tune || (id != embeddings.0 && id != embeddings.1)
            });
        }
        let mean = sum / instances.len() as f64;
        info!("epoch {} mean loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome { params, epoch_losses })
}

/// Builds the vocabulary and training instances from `train_docs`,
/// initializes, and trains.
pub fn fit(
    train_docs: &[Document],
    cfg: &ModelConfig,
    hp: &Hyperparams,
    ablation: Ablation,
    pretrained: Option<&EmbeddingMatrix>,
) -> Result<TrainOutcome> {
    let instances = build_instances(train_docs, Mode::Train);
    let corpus_vocab = Vocab::from_documents(train_docs);
    let vocab = match pretrained {
        // Pretrained rows first, then corpus words the file lacks.
        Some(m) => Vocab::from_words(m.words().iter().chain(corpus_vocab.words()).cloned()),
        None => corpus_vocab,
    };
    let params = init_params(cfg, hp, vocab, pretrained)?;
    train(params, train_docs, &instances, hp, ablation)
}

/// Resolution outcome of one eval instance.
fn judge(params: &ModelParams, docs: &[Document], inst: &Instance, ablation: Ablation) -> Result<Counts> {
    if inst.k() == 0 {
        return Ok(Counts {
            gold: 1,
            attempted: 0,
            hits: 0,
        });
    }
    let r = model::resolve_with_features(
        params,
        &docs[inst.doc],
        &inst.zp,
        &inst.candidates,
        &inst.features,
        ablation,
    )?;
    let predicted = argmax_last(&r.probs).ok_or(Error::EmptyCandidates)?;
    let hit = matches!((inst.candidates[predicted].chain_id, inst.zp.chain_id), (Some(a), Some(b)) if a == b);
    Ok(Counts {
        gold: 1,
        attempted: 1,
        hits: usize::from(hit),
    })
}

/// Recall/precision/F overall and per genre. Instances are resolved in
/// parallel against read-only parameters.
pub fn evaluate(
    params: &ModelParams,
    docs: &[Document],
    instances: &[Instance],
    ablation: Ablation,
) -> Result<Metrics> {
    let outcomes: Vec<Counts> = instances
        .par_iter()
        .map(|inst| judge(params, docs, inst, ablation))
        .collect::<Result<_>>()?;
    let mut m = Metrics::default();
    for (inst, c) in instances.iter().zip(outcomes) {
        m.record(docs[inst.doc].genre, c);
    }
    Ok(m)
}

pub fn evaluate_docs(params: &ModelParams, docs: &[Document], ablation: Ablation) -> Result<Metrics> {
    evaluate(params, docs, &build_instances(docs, Mode::Eval), ablation)
}

/// Trains one model per context window (identical seeds) and evaluates each.
pub fn window_sweep(
    train_docs: &[Document],
    eval_docs: &[Document],
    cfg: &ModelConfig,
    hp: &Hyperparams,
    windows: &[ContextWindow],
    pretrained: Option<&EmbeddingMatrix>,
) -> Result<Vec<(ContextWindow, Metrics)>> {
    if windows.is_empty() {
        return Err(Error::Config("window list is empty".into()));
    }
    let eval_instances = build_instances(eval_docs, Mode::Eval);
    windows
        .iter()
        .map(|&w| {
            let cfg = ModelConfig {
                context_window: w,
                ..cfg.clone()
            };
            let out = fit(train_docs, &cfg, hp, Ablation::Full, pretrained)?;
            let m = evaluate(&out.params, eval_docs, &eval_instances, Ablation::Full)?;
            info!("window {w}: F {:.3}", m.f_score());
            Ok((w, m))
        })
        .collect()
}

/// Retrains with each representation set and evaluates with the same one.
pub fn ablation_study(
    train_docs: &[Document],
    eval_docs: &[Document],
    cfg: &ModelConfig,
    hp: &Hyperparams,
    pretrained: Option<&EmbeddingMatrix>,
) -> Result<Vec<(Ablation, Metrics)>> {
    let eval_instances = build_instances(eval_docs, Mode::Eval);
    Ablation::ALL
        .iter()
        .map(|&a| {
            let out = fit(train_docs, cfg, hp, a, pretrained)?;
            Ok((a, evaluate(&out.params, eval_docs, &eval_instances, a)?))
        })
        .collect()
}

/// Synthetic documents and the first instance among them with exactly
/// `k` candidates.
pub fn fixture_with_k(seed: u64, k: usize) -> Result<(Vec<Document>, Instance)> {
    let spec = SynthSpec {
        n_docs: 4,
        ..SynthSpec::default()
    };
    for s in seed..seed.saturating_add(FIXTURE_TRIES) {
        let docs = generate_synthetic(s, &spec)?;
        if let Some(inst) = build_instances(&docs, Mode::Train).into_iter().find(|i| i.k() == k) {
            let doc = docs[inst.doc].clone();
            return Ok((vec![doc], Instance { doc: 0, ..inst }));
        }
    }
    Err(Error::Config(format!("no {k}-candidate instance near seed {seed}")))
}

const FIXTURE_TRIES: u64 = 64;

/// Central finite differences against backpropagated gradients of one
/// instance's loss. `corrupt` scales the analytic scorer-weight gradient by
/// 1.5 before comparison, as a negative control.
pub fn check_gradients(
    params: &mut ModelParams,
    docs: &[Document],
    inst: &Instance,
    ablation: Ablation,
    opts: &GradCheckOptions,
    corrupt: bool,
) -> Result<GradCheckReport> {
    let mut store = std::mem::take(&mut params.store);
    let scorer_w = params.scorer_w;
    let shell: &ModelParams = params;
    let result = grad_check(
        &mut store,
        |s| {
            let (loss, mut grads) = loss_with_store(s, shell, docs, inst, ablation)?;
            if corrupt {
                if let Some(g) = grads.get_mut(scorer_w) {
                    g.scale(1.5);
                }
            }
            Ok((loss, grads))
        },
        opts,
    );
    params.store = store;
    result
}
