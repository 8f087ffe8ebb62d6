use dyadic_conditioning::{
    build_condition, condition_dropout, joint_concat, joint_split, BlockValue, ConditionBundle, ConditionError, Mode,
    A1, A2, V2,
};
use dyadic_features::layout::{SpeechTokenStream, BODY_DIM, FACE_DIM};
use dyadic_tensor::Matrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn speech(seconds: f64, offset: u32) -> SpeechTokenStream {
    let n = (seconds * 12.5).round() as usize;
    SpeechTokenStream::new((0..n as u32).map(|i| (i + offset) % 16).collect(), 16).unwrap()
}

fn ramp(rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|i| i as f64 * scale).collect())
}

#[test]
fn monadic_bundle_has_only_agent_speech() {
    let b = build_condition(&speech(2.0, 0), None, None, Mode::Monadic, 60).unwrap();
    assert_eq!(b.names(), vec![A1]);
    assert_eq!(b.frames(), 60);
}

#[test]
fn dyadic_two_seconds_gives_sixty_frames() {
    let (a1, a2) = (speech(2.0, 0), speech(2.0, 5));
    let b = build_condition(&a1, Some(&a2), None, Mode::Dyadic, 60).unwrap();
    assert_eq!(b.names(), vec![A1, A2]);
    for block in b.blocks() {
        assert_eq!(block.value.frames(), 60);
        assert!(!block.dropped);
    }
    let BlockValue::Tokens(t) = &b.get(A2).unwrap().value else {
        panic!("user speech should be tokens");
    };
    // Frame 12 sits at 0.4 s, which is token 5 of the user stream.
    assert_eq!(t[12], a2.tokens()[5]);
}

#[test]
fn av_mode_needs_the_user_visual_stream() {
    let (a1, a2) = (speech(2.0, 0), speech(2.0, 1));
    let err = build_condition(&a1, Some(&a2), None, Mode::AvDyadic, 60).unwrap_err();
    assert!(matches!(err, ConditionError::Config(_)), "{err}");
    let v2 = ramp(60, FACE_DIM, 1e-3);
    let b = build_condition(&a1, Some(&a2), Some(&v2), Mode::AvDyadic, 60).unwrap();
    assert_eq!(b.names(), vec![A1, A2, V2]);
    assert!(matches!(build_condition(&a1, None, None, Mode::Dyadic, 60), Err(ConditionError::Config(_))));
}

#[test]
fn push_rejects_wrong_length_and_duplicates() {
    let mut b = ConditionBundle::new(10);
    b.push("x", BlockValue::Categorical(vec![0; 10])).unwrap();
    assert!(matches!(b.push("y", BlockValue::Categorical(vec![0; 9])), Err(ConditionError::Shape(_))));
    assert!(matches!(b.push("x", BlockValue::Categorical(vec![0; 10])), Err(ConditionError::Config(_))));
}

#[test]
fn mode_parses_from_labels() {
    for m in [Mode::Monadic, Mode::Dyadic, Mode::AvDyadic] {
        assert_eq!(m.label().parse::<Mode>().unwrap(), m);
    }
    assert!("triadic".parse::<Mode>().is_err());
}

fn three_blocks() -> ConditionBundle {
    let (a1, a2) = (speech(1.0, 0), speech(1.0, 3));
    let v2 = ramp(30, FACE_DIM, 1e-3);
    build_condition(&a1, Some(&a2), Some(&v2), Mode::AvDyadic, 30).unwrap()
}

#[test]
fn dropout_extremes() {
    let b = three_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(condition_dropout(&b, 0.0, &mut rng).unwrap().dropout_mask().iter().all(|d| !d));
    assert!(condition_dropout(&b, 1.0, &mut rng).unwrap().dropout_mask().iter().all(|&d| d));
    assert!(condition_dropout(&b, 1.5, &mut rng).is_err());
}

#[test]
fn dropout_rate_matches_rho() {
    let b = three_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for rho in [0.1, 0.3, 0.5] {
        let draws = 10_000;
        let mut dropped = 0usize;
        for _ in 0..draws {
            dropped += condition_dropout(&b, rho, &mut rng).unwrap().dropout_mask().iter().filter(|&&d| d).count();
        }
        let frac = dropped as f64 / (draws * 3) as f64;
        assert!((frac - rho).abs() <= 0.02, "rho {rho}: observed {frac}");
    }
}

#[test]
fn dropout_leaves_values_untouched() {
    let b = three_blocks();
    let d = condition_dropout(&b, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    for (x, y) in b.blocks().iter().zip(d.blocks()) {
        assert_eq!(x.value, y.value);
    }
}

#[test]
fn joint_split_rejects_bad_width() {
    assert!(joint_split(&Matrix::zeros(4, FACE_DIM)).is_err());
    assert!(joint_concat(&Matrix::zeros(4, FACE_DIM), &Matrix::zeros(5, BODY_DIM)).is_err());
    let (f, b) = joint_split(&Matrix::zeros(0, FACE_DIM + BODY_DIM)).unwrap();
    assert_eq!((f.shape(), b.shape()), ((0, FACE_DIM), (0, BODY_DIM)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn joint_round_trip_is_bitwise(n in 0usize..12, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let face = Matrix::from_vec(n, FACE_DIM, (0..n * FACE_DIM).map(|_| rng.random::<f64>() - 0.5).collect());
        let body = Matrix::from_vec(n, BODY_DIM, (0..n * BODY_DIM).map(|_| rng.random::<f64>() * 3.0).collect());
        let joint = joint_concat(&face, &body).unwrap();
        prop_assert_eq!(joint.cols(), 395);
        let (f, b) = joint_split(&joint).unwrap();
        prop_assert_eq!(f, face);
        prop_assert_eq!(b, body);
    }

    #[test]
    fn resampled_blocks_always_span_n_frames(seconds in 1u32..6, n in 1usize..200) {
        let (a1, a2) = (speech(seconds as f64, 0), speech(seconds as f64, 2));
        let b = build_condition(&a1, Some(&a2), None, Mode::Dyadic, n).unwrap();
        for block in b.blocks() {
            prop_assert_eq!(block.value.frames(), n);
        }
    }
}
