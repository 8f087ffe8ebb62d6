use dyadic_control::{
    av_tokens, bucketize, dynamism, fit_thresholds, moving_average, temporal_gesture_drop, AvRange, AvSequence,
    BucketSpec, ControlError, ControlKind, FauMapping, GestureCondition, Scheme,
};
use dyadic_tensor::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn dynamism_is_absolute_first_difference_with_zero_start() {
    let s = Matrix::from_vec(3, 1, vec![0.0, 1.0, 3.0]);
    assert_eq!(dynamism(&s).data(), &[0.0, 1.0, 2.0]);
    let c = Matrix::filled(5, 2, 4.2);
    assert!(dynamism(&c).data().iter().all(|&v| v == 0.0));
    let ramp = Matrix::from_vec(6, 1, (0..6).map(|i| -0.5 * i as f64).collect());
    assert_eq!(&dynamism(&ramp).data()[1..], &[0.5; 5]);
}

#[test]
fn moving_average_examples() {
    assert_eq!(moving_average(&[2.0; 7], 5).unwrap(), vec![2.0; 7]);
    let x = [1.0, -2.0, 5.0, 0.5];
    assert_eq!(moving_average(&x, 1).unwrap(), x.to_vec());
    let mut spike = vec![0.0; 11];
    spike[5] = 3.0;
    let out = moving_average(&spike, 5).unwrap();
    let peak = out.iter().cloned().fold(f64::MIN, f64::max);
    assert!((peak - 0.6).abs() < 1e-12);
    // Edges average over the samples that exist.
    let out = moving_average(&[1.0, 2.0, 3.0, 4.0], 3).unwrap();
    assert_eq!(out, vec![1.5, 2.0, 3.0, 3.5]);
    assert!(moving_average(&x, 0).is_err());
}

#[test]
fn quartile_thresholds_of_uniform_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
    let spec = fit_thresholds(&xs, 0, Scheme::Quartile).unwrap();
    for (t, want) in spec.thresholds.iter().zip([0.25, 0.5, 0.75]) {
        assert!((t - want).abs() < 0.02, "{t} vs {want}");
    }
    let median = fit_thresholds(&xs, 2, Scheme::Quantile).unwrap();
    assert_eq!(median.thresholds.len(), 1);
    assert!((median.thresholds[0] - 0.5).abs() < 0.02);
    assert_eq!(fit_thresholds(&xs, 4, Scheme::Quantile).unwrap(), spec);
}

#[test]
fn degenerate_threshold_inputs_are_rejected() {
    assert!(matches!(fit_thresholds(&[0.3; 50], 4, Scheme::Quantile), Err(ControlError::Degenerate(_))));
    assert!(fit_thresholds(&[], 4, Scheme::Quantile).is_err());
    assert!(fit_thresholds(&[0.0, 1.0], 1, Scheme::Quantile).is_err());
    assert!(BucketSpec::new(vec![0.5, 0.5]).is_err());
    assert!(BucketSpec::new(vec![]).is_err());
}

#[test]
fn bucketize_examples() {
    let spec = BucketSpec::new(vec![0.5]).unwrap();
    assert_eq!(bucketize(&[0.7], &spec), vec![1]);
    let spec = BucketSpec::new(vec![-1.0, 0.0, 2.0]).unwrap();
    assert_eq!(bucketize(&[-5.0, 10.0, 0.0, 0.1], &spec), vec![0, 3, 1, 2]);
}

#[test]
fn av_token_edges_and_midpoint() {
    let n = 60;
    let seq = |v: f64| AvSequence::new(vec![v; n], vec![v; n]).unwrap();
    let r = AvRange::CONDITIONING;
    assert_eq!(av_tokens(&seq(-1.0), 12, 1.0, 30.0, r).unwrap(), vec![(0, 0); 2]);
    assert_eq!(av_tokens(&seq(1.0), 12, 1.0, 30.0, r).unwrap(), vec![(11, 11); 2]);
    assert_eq!(av_tokens(&seq(0.0), 12, 1.0, 30.0, r).unwrap(), vec![(6, 6); 2]);
    // The adapter range bins [0, 1].
    assert_eq!(av_tokens(&seq(0.5), 12, 1.0, 30.0, AvRange::ADAPTER).unwrap(), vec![(6, 6); 2]);
    assert!(av_tokens(&seq(0.0), 1, 1.0, 30.0, r).is_err());
    assert!(av_tokens(&AvSequence::new(vec![0.0; 10], vec![0.0; 10]).unwrap(), 12, 1.0, 30.0, r).is_err());
}

#[test]
fn av_sequence_enforces_range() {
    assert!(AvSequence::new(vec![1.2], vec![0.0]).is_err());
    assert!(AvSequence::new(vec![0.0], vec![f64::NAN]).is_err());
    assert!(AvSequence::new(vec![0.0, 0.1], vec![0.0]).is_err());
}

#[test]
fn gesture_drop_extremes_and_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw = GestureCondition::Raw(Matrix::filled(50, 4, 1.5));
    let (same, keep) = temporal_gesture_drop(&raw, 0.0, &mut rng).unwrap();
    assert_eq!(same, raw);
    assert!(keep.iter().all(|&k| k));
    let (none, _) = temporal_gesture_drop(&raw, 1.0, &mut rng).unwrap();
    assert_eq!(none, GestureCondition::Raw(Matrix::zeros(50, 4)));
    let codes = GestureCondition::Codes { ids: vec![2; 40], null_id: 8 };
    let (none, _) = temporal_gesture_drop(&codes, 1.0, &mut rng).unwrap();
    assert_eq!(none, GestureCondition::Codes { ids: vec![8; 40], null_id: 8 });

    // 10^4 frames at p = 0.3: the dropped count is Binomial(10^4, 0.3), sd ≈ 45.8.
    let big = GestureCondition::Codes { ids: vec![1; 10_000], null_id: 4 };
    let (_, keep) = temporal_gesture_drop(&big, 0.3, &mut rng).unwrap();
    let dropped = keep.iter().filter(|&&k| !k).count() as f64;
    assert!((dropped - 3000.0).abs() < 4.0 * 45.83, "dropped {dropped}");
    assert!(temporal_gesture_drop(&big, 1.1, &mut rng).is_err());
}

#[test]
fn control_signal_widths() {
    let dims: Vec<usize> = [ControlKind::HeadRotation, ControlKind::Eyebrows, ControlKind::Mouth, ControlKind::Gaze]
        .iter()
        .map(|k| k.dim())
        .collect();
    assert_eq!(dims, vec![3, 1, 1, 2]);
    let map = FauMapping::default();
    map.validate().unwrap();
    let mut fau = Matrix::zeros(4, dyadic_control::FAU_DIM);
    for &i in &map.eyebrows {
        fau.set(0, i, 3.0);
    }
    let brows = map.signal(ControlKind::Eyebrows, &fau).unwrap();
    assert_eq!(brows.shape(), (4, 1));
    assert_eq!(brows.get(0, 0), 3.0);
    assert_eq!(map.signal(ControlKind::Mouth, &fau).unwrap().get(0, 0), 0.0);
    let face = Matrix::zeros(5, dyadic_features::layout::FACE_DIM);
    assert_eq!(dyadic_control::head_rotation(&face).unwrap().shape(), (5, 3));
}

proptest! {
    #[test]
    fn bucketize_is_monotone_and_transform_invariant(
        mut xs in prop::collection::vec(-10.0f64..10.0, 1..50),
        taus in prop::collection::btree_set(-1000i32..1000, 1..6),
    ) {
        let taus: Vec<f64> = taus.into_iter().map(|t| t as f64 / 100.0).collect();
        let spec = BucketSpec::new(taus.clone()).unwrap();
        xs.sort_by(f64::total_cmp);
        let b = bucketize(&xs, &spec);
        prop_assert!(b.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(b.iter().all(|&i| i < spec.buckets()));
        let f = |x: f64| x.exp() * 2.0 + 1.0;
        let spec2 = BucketSpec::new(taus.iter().map(|&t| f(t)).collect()).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        prop_assert_eq!(bucketize(&xs2, &spec2), b);
    }

    #[test]
    fn gesture_drop_preserves_kept_frames(seed in 0u64..1000, p in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..40 * 3).map(|_| rng.random::<f64>()).collect();
        let m = Matrix::from_vec(40, 3, data);
        let (out, keep) = temporal_gesture_drop(&GestureCondition::Raw(m.clone()), p, &mut rng).unwrap();
        let GestureCondition::Raw(out) = out else { unreachable!() };
        for (t, &k) in keep.iter().enumerate() {
            if k {
                prop_assert_eq!(out.row(t), m.row(t));
            } else {
                prop_assert!(out.row(t).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn av_tokens_reverse_with_the_sequence(seed in 0u64..1000, windows in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = windows * 30;
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let av = AvSequence::new(a, v).unwrap();
        let fwd = av_tokens(&av, 12, 1.0, 30.0, AvRange::CONDITIONING).unwrap();
        let mut back = av_tokens(&av.reversed(), 12, 1.0, 30.0, AvRange::CONDITIONING).unwrap();
        back.reverse();
        prop_assert_eq!(fwd, back);
    }
}
