use dyadic_adapter::{
    evaluate, gesture_fixture, group_3class, interpolate_hidden, macro_prf, rate_sweep, train_adapter, window_labels,
    Adapter, AdapterConfig, AdapterError, AdapterTrainConfig, CodePrediction, CodeStream, FixtureConfig,
    FrozenSpeechLm, HiddenStates, TrainPair, LM_RATE,
};
use dyadic_tensor::{Graph, Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn column(v: &[f64]) -> Matrix {
    Matrix::from_vec(v.len(), 1, v.to_vec())
}

#[test]
fn equal_rates_are_the_identity() {
    let h = Matrix::from_vec(3, 2, vec![1.0, -1.0, 0.5, 2.0, 7.0, 3.0]);
    assert_eq!(interpolate_hidden(&h, 12.5, 12.5).unwrap(), h);
}

#[test]
fn halving_uses_interval_midpoints() {
    let out = interpolate_hidden(&column(&[0.0, 2.0, 4.0, 6.0]), 2.0, 1.0).unwrap();
    assert_eq!(out.data(), &[1.0, 5.0]);
}

#[test]
fn empty_output_is_a_domain_error() {
    let h = column(&[1.0, 2.0]);
    assert!(matches!(interpolate_hidden(&h, 12.5, 1.0), Err(AdapterError::Domain(_))));
    assert!(matches!(interpolate_hidden(&h, 0.0, 1.0), Err(AdapterError::Domain(_))));
    assert!(HiddenStates::new(Matrix::zeros(0, 4), 12.5).is_err());
    assert!(HiddenStates::new(column(&[f64::NAN]), 12.5).is_err());
}

proptest! {
    #[test]
    fn doubling_then_halving_recovers_ramps(len in 2usize..40, a in -5.0f64..5.0, b in -2.0f64..2.0) {
        let ramp: Vec<f64> = (0..len).map(|i| a + b * i as f64).collect();
        let up = interpolate_hidden(&column(&ramp), 1.0, 2.0).unwrap();
        prop_assert_eq!(up.rows(), 2 * len);
        let back = interpolate_hidden(&up, 2.0, 1.0).unwrap();
        for (x, y) in back.data().iter().zip(&ramp) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn macro_prf_ignores_renaming_and_order(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60),
        shift in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let (pred, gold): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let base = macro_prf(&pred, &gold, &[]).unwrap();
        let rename = |v: &[usize]| v.iter().map(|&c| (c + shift) % 5 + 10).collect::<Vec<_>>();
        let renamed = macro_prf(&rename(&pred), &rename(&gold), &[]).unwrap();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (sp, sg): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
        let reordered = macro_prf(&sp, &sg, &[]).unwrap();
        for other in [renamed, reordered] {
            prop_assert!((other.precision - base.precision).abs() < 1e-12);
            prop_assert!((other.recall - base.recall).abs() < 1e-12);
            prop_assert!((other.f1 - base.f1).abs() < 1e-12);
        }
    }
}

#[test]
fn three_class_groups_are_contiguous_thirds() {
    assert_eq!(group_3class(0).unwrap(), 0);
    assert_eq!(group_3class(5).unwrap(), 1);
    assert_eq!(group_3class(11).unwrap(), 2);
    let all: Vec<usize> = (0..12).map(|i| group_3class(i).unwrap()).collect();
    assert_eq!(all, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    assert!(matches!(group_3class(12), Err(AdapterError::Domain(_))));
}

#[test]
fn macro_prf_hand_cases() {
    let p = macro_prf(&[0, 1, 2], &[0, 1, 2], &[]).unwrap();
    assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    // gold [A, B, A], pred [A, A, A]
    let p = macro_prf(&[0, 0, 0], &[0, 1, 0], &[]).unwrap();
    assert!((p.precision - 1.0 / 3.0).abs() < 1e-12);
    assert!((p.recall - 0.5).abs() < 1e-12);
    assert!((p.f1 - 0.4).abs() < 1e-12);
    // The null class (9) is left out of the average.
    let p = macro_prf(&[0, 9, 9], &[0, 9, 0], &[9]).unwrap();
    assert_eq!((p.precision, p.recall), (1.0, 0.5));
    assert!(matches!(macro_prf(&[9], &[9], &[9]), Err(AdapterError::Domain(_))));
    assert!(matches!(macro_prf(&[0], &[0, 1], &[]), Err(AdapterError::Shape(_))));
}

#[test]
fn forward_gives_one_finite_row_per_window() {
    let lm = FrozenSpeechLm::new(16, 24, 0).unwrap();
    let hidden = lm.hidden_states(&(0..50u32).map(|i| i % 16).collect::<Vec<_>>()).unwrap();
    assert_eq!(hidden.source_rate, LM_RATE);
    let h = hidden.at_rate(2.0).unwrap();
    assert_eq!(h.rows(), 8);
    let adapter = Adapter::new(AdapterConfig::new(24, 5), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let logits = adapter.logits(&h).unwrap();
    assert_eq!(logits.shape(), (8, 5));
    assert!(logits.data().iter().all(|v| v.is_finite()));
    assert!(matches!(adapter.logits(&Matrix::zeros(2, 7)), Err(AdapterError::Shape(_))));
}

#[test]
fn the_speech_model_stays_outside_the_optimiser() {
    let lm = FrozenSpeechLm::new(16, 24, 0).unwrap();
    let before = lm.clone();
    let hidden = lm.hidden_states(&[1, 2, 3, 4, 5, 6]).unwrap();
    let adapter = Adapter::new(AdapterConfig::new(24, 3), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!(adapter.store().names().iter().all(|n| n.starts_with("adapter.")));
    let mut g = Graph::new();
    let h = g.input(hidden.h.clone());
    let logits = adapter.forward(&mut g, h).unwrap();
    let loss = g.cross_entropy(logits, vec![0, 1, 2, 0, 1, 2]);
    let grads = g.backward(loss);
    let dh = grads.get(h).expect("gradient reaches the hidden states");
    assert!(dh.data().iter().map(|v| v * v).sum::<f64>() > 0.0);
    let pairs = vec![TrainPair { hidden, codes: vec![0, 1, 2, 0, 1, 2] }];
    let cfg = AdapterTrainConfig { epochs: 2, rate: LM_RATE, width: 16, ..Default::default() };
    train_adapter(&pairs, &[], CodeStream::Gesture { vocab: 2 }, &cfg).unwrap();
    assert_eq!(lm, before);
}

fn blobs(n: usize, classes: usize, seed: u64) -> TrainPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = classes;
    let mut data = Vec::with_capacity(n * d);
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..classes);
        for j in 0..d {
            let centre = if j == c { 3.0 } else { 0.0 };
            data.push(centre + rng.random::<f64>() - 0.5);
        }
        codes.push(c);
    }
    TrainPair {
        hidden: HiddenStates::new(Matrix::from_vec(n, d, data), 1.0).unwrap(),
        codes,
    }
}

#[test]
fn linearly_separable_windows_are_learned() {
    let cfg = AdapterTrainConfig { epochs: 10, rate: 1.0, width: 64, ..Default::default() };
    let stream = CodeStream::Valence;
    let model = train_adapter(&[blobs(400, 12, 0)], &[blobs(200, 12, 1)], stream, &cfg).unwrap();
    let s = evaluate(&model, &[blobs(300, 12, 2)]).unwrap();
    assert!(s.accuracy >= 0.95, "accuracy {}", s.accuracy);
    assert!(s.grouped_accuracy.unwrap() >= s.accuracy);
    assert_eq!(model.history.len(), 10);
    assert!(model.history.iter().all(|e| e.valid.is_some()));
}

#[test]
fn single_class_labels_collapse_to_that_class() {
    let mut pair = blobs(100, 3, 4);
    pair.codes = vec![7; 100];
    let cfg = AdapterTrainConfig { epochs: 60, rate: 1.0, width: 16, lr: 1e-2, ..Default::default() };
    let model = train_adapter(std::slice::from_ref(&pair), &[], CodeStream::Arousal, &cfg).unwrap();
    let s = evaluate(&model, &[pair]).unwrap();
    assert_eq!(s.accuracy, 1.0);
    assert_eq!(s.prf.f1, 1.0);
}

#[test]
fn labels_outside_the_stream_are_data_errors() {
    let mut pair = blobs(10, 3, 0);
    pair.codes[0] = 12;
    let cfg = AdapterTrainConfig { epochs: 1, rate: 1.0, width: 8, ..Default::default() };
    assert!(matches!(train_adapter(&[pair], &[], CodeStream::Valence, &cfg), Err(AdapterError::Data(_))));
}

#[test]
fn window_labels_take_the_majority() {
    // 4 positions per second, windows of one second.
    let fine = [1, 1, 2, 2, 0, 2, 2, 2];
    assert_eq!(window_labels(&fine, 4.0, 1.0, 2).unwrap(), vec![1, 2]);
    assert_eq!(window_labels(&fine, 4.0, 2.0, 4).unwrap(), vec![1, 2, 0, 2]);
}

#[test]
fn predictions_expand_to_motion_frames() {
    let p = CodePrediction {
        stream: CodeStream::Valence,
        rate: 2.0,
        ids: vec![3, 4, 5],
        logits: Matrix::zeros(3, 12),
    };
    let frames = p.to_frames(45, 30.0);
    assert_eq!(&frames[..15], &[3; 15]);
    assert_eq!(&frames[15..30], &[4; 15]);
    assert_eq!(&frames[30..], &[5; 15]);
}

#[test]
fn gesture_fixture_tokens_encode_their_labels() {
    let cfg = FixtureConfig::default();
    let seqs = gesture_fixture(&cfg, 3).unwrap();
    assert_eq!(seqs.len(), cfg.sequences);
    for s in &seqs {
        assert_eq!(s.tokens.len(), 150);
        for (&t, &l) in s.tokens.iter().zip(&s.labels) {
            assert_eq!(t / cfg.tokens_per_label, l as u32);
            assert!(t < cfg.vocab());
        }
    }
}

#[test]
fn rate_sweep_on_sub_second_fixture() {
    let cfg = FixtureConfig::default();
    let lm = FrozenSpeechLm::new(cfg.vocab(), 32, 7).unwrap();
    let train = gesture_fixture(&cfg, 1).unwrap();
    let test = gesture_fixture(&FixtureConfig { sequences: 20, ..cfg.clone() }, 2).unwrap();
    let rows = rate_sweep(&lm, &cfg, &train, &test, &[1.0, 2.0], &AdapterTrainConfig::default()).unwrap();
    for r in &rows {
        println!("rate {}: acc {:.3} P {:.3} R {:.3} F1 {:.3}", r.rate, r.scores.accuracy, r.scores.prf.precision, r.scores.prf.recall, r.scores.prf.f1);
    }
    assert!(rows[1].scores.prf.f1 >= 0.9);
    assert!(rows[1].scores.prf.f1 >= rows[0].scores.prf.f1);
}
