use std::collections::BTreeSet;

use zpsnn::candidates::SENTENCE_WINDOW;
use zpsnn::corpus::{generate_synthetic, parse_conll_str, Document, Genre, SynthSpec, Vocab, EMPTY_POS};
use zpsnn::model::{self, checkpoint, Ablation, ContextWindow, ModelConfig};
use zpsnn::nn::{cross_entropy, GradCheckOptions};
use zpsnn::train::{
    self, build_instances, evaluate, evaluate_docs, fit, init_params, report, total_loss, window_sweep, Counts,
    Hyperparams, Metrics, Mode,
};
use zpsnn::Error;

fn small_config() -> ModelConfig {
    ModelConfig {
        embedding_dim: 6,
        zp_hidden: 4,
        local_hidden: [8, 6, 5],
        global_hidden: 4,
        ..ModelConfig::default()
    }
}

fn hp(epochs: usize, seed: u64) -> Hyperparams {
    Hyperparams {
        epochs,
        seed,
        ..Hyperparams::default()
    }
}

fn synthetic(seed: u64, n_docs: usize) -> Vec<Document> {
    generate_synthetic(
        seed,
        &SynthSpec {
            n_docs,
            ..SynthSpec::default()
        },
    )
    .unwrap()
}

/// An AZP whose only chain-mate sits three sentences back.
const FAR: &str = "\
#begin document (tc/test/00/far); part 000
tc/test/00/far 0 0 a NN (TOP(IP(NP*) (1)
tc/test/00/far 0 1 v VV (VP*))) -

tc/test/00/far 0 0 b NN (TOP(IP(NP*) -
tc/test/00/far 0 1 v VV (VP*))) -

tc/test/00/far 0 0 c NN (TOP(IP(NP*) -
tc/test/00/far 0 1 v VV (VP*))) -

tc/test/00/far 0 0 *pro* -NONE- (TOP(IP(NP*) (1)
tc/test/00/far 0 1 v VV (VP*))) -

#end document
";

#[test]
fn no_zero_pronouns_no_instances() {
    let text = "#begin document (wb/x/00/y); part 000\nwb/x/00/y 0 0 a NN (TOP(NP*)) -\n\n#end document\n";
    let docs = parse_conll_str(text).unwrap();
    assert!(build_instances(&docs, Mode::Train).is_empty());
    assert!(build_instances(&docs, Mode::Eval).is_empty());
}

#[test]
fn unreachable_antecedent_dropped_for_training_kept_for_eval() {
    let docs = parse_conll_str(FAR).unwrap();
    assert!(build_instances(&docs, Mode::Train).is_empty());
    let eval = build_instances(&docs, Mode::Eval);
    assert_eq!(eval.len(), 1);
    assert!(!eval[0].has_gold());
    assert_eq!(eval[0].k(), 2);
}

/// Brute-force recount of anaphoric ZPs whose chain contains an NP node in
/// the window that ends before the gap.
fn count_reachable(docs: &[Document]) -> usize {
    let mut n = 0;
    for d in docs {
        for (s, sent) in d.sentences.iter().enumerate() {
            for tok in sent.tokens.iter().filter(|t| t.form == "*pro*") {
                let Some(chain) = d.chains.iter().find(|(_, ms)| {
                    ms.iter()
                        .any(|m| m.sentence == s && m.start == tok.index && m.end == tok.index + 1)
                }) else {
                    continue;
                };
                let mut np_spans = BTreeSet::new();
                for w in s.saturating_sub(SENTENCE_WINDOW)..=s {
                    for (_, node) in d.sentences[w].tree.walk() {
                        let overt = (node.start..node.end).any(|i| d.sentences[w].tokens[i].pos != EMPTY_POS);
                        if node.is_np() && overt && (w < s || node.end <= tok.index) {
                            np_spans.insert((w, node.start, node.end));
                        }
                    }
                }
                if chain.1.iter().any(|m| np_spans.contains(&(m.sentence, m.start, m.end))) {
                    n += 1;
                }
            }
        }
    }
    n
}

#[test]
fn instance_count_matches_recount_on_synthetic_corpus() {
    let docs = generate_synthetic(7, &SynthSpec::default()).unwrap();
    let n = build_instances(&docs, Mode::Train).len();
    assert!(n > 0);
    assert_eq!(n, count_reachable(&docs));
}

#[test]
fn single_candidate_has_zero_loss_every_epoch() {
    let docs = synthetic(3, 6);
    let inst = build_instances(&docs, Mode::Train)
        .into_iter()
        .find(|i| i.k() == 2)
        .unwrap();
    // Keep only the gold candidate.
    let g = inst.gold.iter().position(|&x| x > 0.0).unwrap();
    let single = train::Instance {
        candidates: vec![inst.candidates[g].clone()],
        features: vec![inst.features[g].clone()],
        gold: vec![1.0],
        ..inst
    };
    let params = init_params(&small_config(), &hp(5, 1), Vocab::from_documents(&docs), None).unwrap();
    let out = train::train(params, &docs, &[single], &hp(5, 1), Ablation::Full).unwrap();
    assert_eq!(out.epoch_losses, vec![0.0; 5]);
}

#[test]
fn total_loss_matches_direct_recomputation() {
    let docs = synthetic(4, 5);
    let insts = build_instances(&docs, Mode::Train);
    let params = init_params(
        &small_config(),
        &Hyperparams {
            init_range: 0.3,
            ..hp(1, 2)
        },
        Vocab::from_documents(&docs),
        None,
    )
    .unwrap();
    let direct: f64 = insts
        .iter()
        .map(|i| {
            let r = model::resolve(&params, &docs[i.doc], &i.zp, &i.candidates, Ablation::Full).unwrap();
            cross_entropy(&r.probs, &i.gold).unwrap()
        })
        .sum();
    let total = total_loss(&params, &docs, &insts, Ablation::Full).unwrap();
    assert!(total >= 0.0);
    assert!((total - direct).abs() < 1e-12);
    let (first, _) = train::instance_loss(&params, &docs, &insts[0], Ablation::Full).unwrap();
    let r = model::resolve(
        &params,
        &docs[insts[0].doc],
        &insts[0].zp,
        &insts[0].candidates,
        Ablation::Full,
    )
    .unwrap();
    assert!((first - cross_entropy(&r.probs, &insts[0].gold).unwrap()).abs() < 1e-12);
}

#[test]
fn one_step_updates_the_unknown_vector() {
    let docs = synthetic(5, 2);
    let insts = build_instances(&docs, Mode::Train);
    // A vocabulary missing every corpus word routes all lookups through unk.
    let params = init_params(&small_config(), &hp(1, 3), Vocab::from_words(["zzz"]), None).unwrap();
    let before = params.word_vector("never-seen");
    assert_eq!(before, params.word_vector("also-unseen"));
    let out = train::train(
        params,
        &docs,
        &insts[..1],
        &Hyperparams {
            shuffle: false,
            ..hp(1, 3)
        },
        Ablation::Full,
    )
    .unwrap();
    let after = out.params.word_vector("never-seen");
    assert_ne!(before, after);
    assert_eq!(after, out.params.word_vector("also-unseen"));
}

#[test]
fn frozen_embeddings_stay_put() {
    let docs = synthetic(6, 3);
    let insts = build_instances(&docs, Mode::Train);
    let h = Hyperparams {
        fine_tune_embeddings: false,
        init_range: 0.2,
        ..hp(2, 4)
    };
    let params = init_params(&small_config(), &h, Vocab::from_documents(&docs), None).unwrap();
    let out = train::train(params.clone(), &docs, &insts, &h, Ablation::Full).unwrap();
    assert_eq!(
        out.params.store.get(params.embeddings),
        params.store.get(params.embeddings)
    );
    assert_eq!(out.params.store.get(params.unk), params.store.get(params.unk));
    assert_ne!(out.params.store.get(params.scorer_w), params.store.get(params.scorer_w));
}

#[test]
fn non_finite_loss_names_the_instance() {
    let docs = synthetic(8, 2);
    let insts = build_instances(&docs, Mode::Train);
    let mut params = init_params(&small_config(), &hp(1, 5), Vocab::from_documents(&docs), None).unwrap();
    let b = params.scorer_b;
    params.store.get_mut(b).data_mut()[0] = f64::NAN;
    match train::train(params, &docs, &insts, &hp(1, 5), Ablation::Full) {
        Err(Error::NonFinite(msg)) => assert!(msg.contains("syn/8/"), "{msg}"),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("training on NaN parameters succeeded"),
    }
}

#[test]
fn training_is_reproducible_to_the_byte() {
    let train_docs = synthetic(9, 6);
    let eval_docs = synthetic(10, 3);
    let run = || {
        let out = fit(
            &train_docs,
            &small_config(),
            &Hyperparams {
                init_range: 0.1,
                ..hp(3, 11)
            },
            Ablation::Full,
            None,
        )
        .unwrap();
        let m = evaluate_docs(&out.params, &eval_docs, Ablation::Full).unwrap();
        (
            checkpoint::encode(&out.params),
            report::metrics_csv(&m, Ablation::Full),
            out.epoch_losses,
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn metrics_identities() {
    let docs: Vec<Document> = [synthetic(12, 4), parse_conll_str(FAR).unwrap()].concat();
    let insts = build_instances(&docs, Mode::Eval);
    let params = init_params(&small_config(), &hp(1, 6), Vocab::from_documents(&docs), None).unwrap();
    let m = evaluate(&params, &docs, &insts, Ablation::Full).unwrap();
    let o = m.overall;
    assert!(o.hits <= o.attempted && o.attempted <= o.gold);
    assert_eq!(o.gold, insts.len());
    assert_eq!(o.attempted, insts.iter().filter(|i| i.k() > 0).count());
    let mut sum = Counts::default();
    for c in m.per_genre.values() {
        sum.add(*c);
    }
    assert_eq!(sum, o);
    assert_eq!(
        m.per_genre.keys().copied().collect::<Vec<_>>(),
        vec![Genre::Tc, Genre::Syn]
    );
    // The unreachable AZP can never be a hit.
    assert_eq!(m.per_genre[&Genre::Tc].hits, 0);
    assert_eq!(Metrics::default().f_score(), 0.0);
}

#[test]
fn sweep_consistency() {
    let train_docs = synthetic(13, 4);
    let eval_docs = synthetic(14, 2);
    let h = Hyperparams {
        init_range: 0.1,
        ..hp(2, 7)
    };
    let cfg = small_config();
    let rows = window_sweep(&train_docs, &eval_docs, &cfg, &h, &[ContextWindow::All], None).unwrap();
    let direct = fit(&train_docs, &cfg, &h, Ablation::Full, None).unwrap();
    let m = evaluate_docs(&direct.params, &eval_docs, Ablation::Full).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].1, m);

    let twice = window_sweep(
        &train_docs,
        &eval_docs,
        &cfg,
        &h,
        &[ContextWindow::Words(1), ContextWindow::Words(1)],
        None,
    )
    .unwrap();
    assert_eq!(twice[0].1.f_score(), twice[1].1.f_score());
    assert!(window_sweep(&train_docs, &eval_docs, &cfg, &h, &[], None).is_err());
}

#[test]
fn gradients_of_a_three_candidate_instance_check_out() {
    let (docs, inst) = train::fixture_with_k(0, 3).unwrap();
    assert_eq!(inst.k(), 3);
    let h = Hyperparams {
        init_range: 0.3,
        ..hp(1, 0)
    };
    let mut params = init_params(&small_config(), &h, Vocab::from_documents(&docs), None).unwrap();
    let opts = GradCheckOptions::default();
    let r = train::check_gradients(&mut params, &docs, &inst, Ablation::Full, &opts, false).unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
    let bad = train::check_gradients(&mut params, &docs, &inst, Ablation::Full, &opts, true).unwrap();
    assert!(bad.max_rel_error > 1e-4);
    assert_eq!(bad.worst_param, "scorer.w");
}

#[test]
fn report_shapes() {
    let docs = synthetic(15, 2);
    let params = init_params(&small_config(), &hp(1, 8), Vocab::from_documents(&docs), None).unwrap();
    let m = evaluate_docs(&params, &docs, Ablation::LocalOnly).unwrap();
    let csv = report::metrics_csv(&m, Ablation::LocalOnly);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 1 + m.per_genre.len());
    assert!(lines[1].starts_with("local_only,Overall,"));
    assert_eq!(
        report::loss_log_csv(&[0.5, 0.25]),
        "epoch,mean_loss\n1,0.500000000\n2,0.250000000\n"
    );
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]

    /// With scores confined to [-1, 1], one gold among k candidates can do no
    /// better than a +1 gold score against -1 everywhere else.
    #[test]
    fn bounded_scores_bound_the_loss(
        s in proptest::collection::vec(-1.0f64..=1.0, 2..8),
        g in 0usize..8,
    ) {
        let k = s.len();
        let mut gold = vec![0.0; k];
        gold[g % k] = 1.0;
        let p = zpsnn::nn::softmax(&s).unwrap();
        let floor = (1.0 + (k as f64 - 1.0) * (-2.0f64).exp()).ln();
        proptest::prop_assert!(cross_entropy(&p, &gold).unwrap() >= floor - 1e-12);
    }
}
