use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zpsnn::nn::{
    cross_entropy, grad_check, lstm_run, lstm_step, mlp_forward, softmax, GradCheckOptions, LstmParams, MlpParams,
    ParamStore, Tape, Tensor, LOG_FLOOR,
};

/// Textbook softmax without max subtraction; fine for |s| ≤ 50.
fn naive_softmax(s: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = s.iter().map(|x| x.exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

fn naive_cross_entropy(p: &[f64], gold: &[f64]) -> f64 {
    p.iter().zip(gold).map(|(p, g)| -g * p.max(LOG_FLOOR).ln()).sum()
}

#[test]
fn softmax_matches_naive_oracle() {
    let fixtures: [&[f64]; 5] = [
        &[0.0],
        &[1.0, 2.0, 3.0],
        &[-0.5, 0.25, 0.75, -0.999],
        &[0.3, 0.3, 0.3],
        &[12.0, -7.5, 0.0, 3.25, -1.0],
    ];
    for s in fixtures {
        let got = softmax(s).unwrap();
        for (a, b) in got.iter().zip(naive_softmax(s)) {
            assert!((a - b).abs() < 1e-12, "{s:?}: {a} vs {b}");
        }
    }
    // exp(1)/(exp(1)+exp(2)+exp(3)), hand-expanded.
    let e = std::f64::consts::E;
    let expected = e / (e + e * e + e * e * e);
    assert!((softmax(&[1.0, 2.0, 3.0]).unwrap()[0] - expected).abs() < 1e-12);
}

#[test]
fn cross_entropy_matches_naive_oracle() {
    let p = [0.2, 0.5, 0.3];
    for gold in [[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0]] {
        let got = cross_entropy(&p, &gold).unwrap();
        assert!((got - naive_cross_entropy(&p, &gold)).abs() < 1e-12);
    }
    assert!((cross_entropy(&p, &[0.0, 1.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
    // Zero probability is floored rather than producing infinity.
    let floored = cross_entropy(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
    assert!((floored + LOG_FLOOR.ln()).abs() < 1e-9);
}

#[test]
fn softmax_rejects_empty_and_non_finite() {
    assert!(softmax(&[]).is_err());
    assert!(softmax(&[1.0, f64::NAN]).is_err());
    assert!(softmax(&[f64::INFINITY]).is_err());
}

/// Scores as a trainable `[1, k]` row so the tape reports their gradient.
fn score_gradient(s: &[f64], gold: &[f64]) -> (f64, Vec<f64>) {
    let mut store = ParamStore::new();
    let id = store.add("s", Tensor::new(vec![1, s.len()], s.to_vec()).unwrap());
    let mut tape = Tape::new(&store);
    let x = tape.lookup(id, 0).unwrap();
    let p = tape.softmax(x).unwrap();
    let loss = tape.cross_entropy(p, gold).unwrap();
    let value = tape.value(loss)[0];
    let g = tape.backward(loss).unwrap();
    (value, g.dense(id, &store).into_data())
}

#[test]
fn cross_entropy_gradient_is_m_times_p_minus_normalized_gold() {
    let cases: [(&[f64], &[f64]); 3] = [
        (&[0.1, -0.4, 0.7], &[0.0, 1.0, 0.0]),
        (&[0.1, -0.4, 0.7, 0.2], &[1.0, 0.0, 1.0, 0.0]),
        (&[2.0, 1.0], &[1.0, 1.0]),
    ];
    for (s, gold) in cases {
        let m: f64 = gold.iter().sum();
        let p = naive_softmax(s);
        let (_, g) = score_gradient(s, gold);
        for j in 0..s.len() {
            let expected = m * (p[j] - gold[j] / m);
            assert!(
                (g[j] - expected).abs() < 1e-10,
                "{s:?} {gold:?} [{j}]: {} vs {expected}",
                g[j]
            );
        }
    }
}

#[test]
fn tanh_affine_passes_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let w = store.add_uniform("w", &[4, 3], 0.8, &mut rng);
    let b = store.add_uniform("b", &[4], 0.8, &mut rng);
    let x = vec![0.3, -0.7, 1.1];
    let report = grad_check(
        &mut store,
        |s| {
            let mut tape = Tape::new(s);
            let xv = tape.input(x.clone());
            let z = tape.affine(w, xv, Some(b))?;
            let h = tape.tanh(z);
            let p = tape.softmax(h)?;
            let loss = tape.cross_entropy(p, &[0.0, 1.0, 0.0, 0.0])?;
            let v = tape.value(loss)[0];
            Ok((v, tape.backward(loss)?))
        },
        &GradCheckOptions {
            entries_per_param: 64,
            ..GradCheckOptions::default()
        },
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
    assert_eq!(report.entries_checked, 16);
}

#[test]
fn lstm_and_mlp_pass_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::new();
    let lstm = LstmParams::register(&mut store, "lstm", 3, 4, 0.5, &mut rng);
    let mlp = MlpParams::register(&mut store, "mlp", 4, &[5, 3], 0.5, &mut rng);
    let seq: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let report = grad_check(
        &mut store,
        |s| {
            let mut tape = Tape::new(s);
            let xs: Vec<_> = seq.iter().map(|x| tape.input(x.clone())).collect();
            let (_, h) = zpsnn::nn::lstm::run(&mut tape, &lstm, &xs, false)?;
            let y = zpsnn::nn::mlp::forward(&mut tape, &mlp, h)?;
            let p = tape.softmax(y)?;
            let loss = tape.cross_entropy(p, &[0.0, 0.0, 1.0])?;
            let v = tape.value(loss)[0];
            Ok((v, tape.backward(loss)?))
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
}

/// Scalar LSTM cell written out gate by gate, for hidden size 1.
#[test]
fn lstm_step_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let p = LstmParams::register(&mut store, "c", 1, 1, 0.9, &mut rng);
    let wi = store.get(p.w_input).data().to_vec();
    let wr = store.get(p.w_recurrent).data().to_vec();
    let bias = store.get(p.bias).data().to_vec();
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let (x, h0, c0) = (0.4, -0.3, 0.2);
    let pre = |k: usize| wi[k] * x + wr[k] * h0 + bias[k];
    let (i, f, o, g) = (sig(pre(0)), sig(pre(1)), sig(pre(2)), pre(3).tanh());
    let c = f * c0 + i * g;
    let h = o * c.tanh();
    let (ht, ct) = lstm_step(
        &store,
        &p,
        &Tensor::vector(vec![x]),
        &Tensor::vector(vec![h0]),
        &Tensor::vector(vec![c0]),
    )
    .unwrap();
    assert!((ht.data()[0] - h).abs() < 1e-12);
    assert!((ct.data()[0] - c).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn softmax_normalizes(s in prop::collection::vec(-1.0f64..1.0, 1..16)) {
        let p = softmax(&s).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn softmax_shift_invariant(s in prop::collection::vec(-30.0f64..30.0, 1..12), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
        let a = softmax(&s).unwrap();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_permutation_equivariant(s in prop::collection::vec(-5.0f64..5.0, 2..10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let p = softmax(&s).unwrap();
        let q = softmax(&permuted).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            prop_assert!((q[k] - p[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_non_negative(s in prop::collection::vec(-1.0f64..1.0, 1..10), bits in any::<u16>()) {
        let p = softmax(&s).unwrap();
        let gold: Vec<f64> = (0..s.len()).map(|i| f64::from((bits >> i) & 1)).collect();
        prop_assert!(cross_entropy(&p, &gold).unwrap() >= 0.0);
    }

    #[test]
    fn lstm_hidden_in_open_unit_interval(seed in any::<u64>(), len in 0usize..6, scale in 0.01f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let p = LstmParams::register(&mut store, "l", 3, 4, scale, &mut rng);
        let seq: Vec<Tensor> = (0..len)
            .map(|_| Tensor::vector((0..3).map(|_| rng.random_range(-10.0..10.0)).collect()))
            .collect();
        let (hs, last) = lstm_run(&store, &p, &seq, false).unwrap();
        prop_assert_eq!(hs.len(), len);
        for h in hs.iter().chain(std::iter::once(&last)) {
            prop_assert!(h.data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn mlp_output_non_negative(seed in any::<u64>(), scale in 0.01f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let p = MlpParams::register(&mut store, "m", 6, &[5, 4, 3], scale, &mut rng);
        let x = Tensor::vector((0..6).map(|_| rng.random_range(-10.0..10.0)).collect());
        let y = mlp_forward(&store, &p, &x).unwrap();
        prop_assert_eq!(y.len(), 3);
        prop_assert!(y.data().iter().all(|&v| v >= 0.0));
    }
}
