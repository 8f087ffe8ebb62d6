use dyadic_conditioning::{
    run_stage2, BlockSpec, BlockValue, CascadeSpec, ConditionBundle, ConditionError, DatasetConfig, EncoderConfig,
    FaceCond, Mode, MotionModel, MotionModelConfig, Normalizers, Target, WindowDataset, A1, A2, FACE_COND,
};
use dyadic_corpus::synth::{generate, SyntheticConfig};
use dyadic_features::layout::{BODY_DIM, FACE_DIM, HEAD_ROTATION_COLS};
use dyadic_features::NormStats;
use dyadic_flowmatch::{AttentionKind, FlowModelConfig, FlowNet, SampleConfig};
use dyadic_tensor::{Graph, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dit(motion_dim: usize) -> FlowModelConfig {
    FlowModelConfig {
        layers: 1,
        hidden_dim: 16,
        ffn_dim: 32,
        heads: 2,
        attention: AttentionKind::SelfAttention,
        window: 8,
        motion_dim,
    }
}

fn model(motion_dim: usize, blocks: Vec<BlockSpec>, seed: u64) -> MotionModel {
    let cfg = MotionModelConfig {
        dit: dit(motion_dim),
        encoder: EncoderConfig {
            vocab: 16,
            block_dim: 8,
            blocks,
        },
        cond_dropout: 0.2,
        drop_policy: Default::default(),
        guidance_drop: Default::default(),
    };
    MotionModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn dyadic_bundle(n: usize) -> ConditionBundle {
    ConditionBundle::from_frames(
        Mode::Dyadic,
        (0..n as u32).map(|i| i % 16).collect(),
        Some((0..n as u32).map(|i| (i * 3) % 16).collect()),
        None,
    )
    .unwrap()
}

#[test]
fn dropped_block_embeds_as_its_null_parameter() {
    let m = model(4, vec![BlockSpec::speech(A1, 0), BlockSpec::speech(A2, 1)], 3);
    let mut bundle = dyadic_bundle(12);
    bundle.get_mut(A2).unwrap().dropped = true;
    let mut g = Graph::new();
    let dropped = m.embed_block(&mut g, bundle.get(A2).unwrap(), 12).unwrap();
    let kept = m.embed_block(&mut g, bundle.get(A1).unwrap(), 12).unwrap();
    let null = m.null_embedding(A2).unwrap();
    let e = g.value(dropped);
    assert_eq!(e.shape(), (12, 8));
    for r in 0..12 {
        assert_eq!(e.row(r), null.row(0));
    }
    assert_ne!(g.value(kept).row(0), null.row(0));
}

#[test]
fn embed_requires_matching_block_order() {
    let m = model(4, vec![BlockSpec::speech(A1, 0), BlockSpec::speech(A2, 1)], 0);
    let mono = ConditionBundle::from_frames(Mode::Monadic, vec![1; 6], None, None).unwrap();
    let mut g = Graph::new();
    assert!(matches!(m.embed(&mut g, &mono), Err(ConditionError::Config(_))));
    assert!(m.embed(&mut g, &dyadic_bundle(6)).is_ok());
}

#[test]
fn unconditional_pass_drops_every_block() {
    let m = model(4, vec![BlockSpec::speech(A1, 0), BlockSpec::speech(A2, 1)], 0);
    let u = m.unconditional(&dyadic_bundle(6));
    assert!(u.dropout_mask().iter().all(|&d| d));
}

#[test]
fn out_of_vocabulary_tokens_are_rejected() {
    let m = model(4, vec![BlockSpec::speech(A1, 0)], 0);
    let b = ConditionBundle::from_frames(Mode::Monadic, vec![3, 99], None, None).unwrap();
    let mut g = Graph::new();
    assert!(matches!(m.embed(&mut g, &b), Err(ConditionError::Shape(_))));
}

fn plain_norms() -> Normalizers {
    Normalizers {
        face: NormStats::identity(FACE_DIM),
        body: NormStats::identity(BODY_DIM),
        face_basis: None,
        body_basis: None,
    }
}

fn face2body_pair(fc: FaceCond) -> (MotionModel, MotionModel) {
    let s1 = model(FACE_DIM, vec![BlockSpec::speech(A1, 0)], 1);
    let s2 = model(BODY_DIM, vec![BlockSpec::speech(A1, 0), BlockSpec::continuous(FACE_COND, fc.dim())], 2);
    (s1, s2)
}

fn random_face(n: usize, seed: u64) -> Matrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(n, FACE_DIM, (0..n * FACE_DIM).map(|_| rng.random::<f64>()).collect())
}

#[test]
fn face2body_passes_the_configured_face_channels() {
    let bundle = ConditionBundle::from_frames(Mode::Monadic, vec![1; 8], None, None).unwrap();
    let face = random_face(8, 4);
    for (fc, width) in [(FaceCond::Headrot, 3), (FaceCond::Full, 137)] {
        let spec = CascadeSpec::face2body(fc);
        let b2 = spec.stage2_bundles(std::slice::from_ref(&bundle), std::slice::from_ref(&face), &plain_norms()).unwrap();
        let BlockValue::Continuous(m) = &b2[0].get(FACE_COND).unwrap().value else {
            panic!("face condition should be continuous");
        };
        assert_eq!(m.cols(), width);
        if fc == FaceCond::Headrot {
            assert_eq!(m, &face.slice_cols(HEAD_ROTATION_COLS.start, HEAD_ROTATION_COLS.end));
        } else {
            assert_eq!(m, &face);
        }
    }
}

#[test]
fn stage_two_is_deterministic_given_stage_one() {
    let (s1, s2) = face2body_pair(FaceCond::Headrot);
    let spec = CascadeSpec::face2body(FaceCond::Headrot);
    let norms = plain_norms();
    spec.check(&s1, &s2, &norms).unwrap();
    let bundles = vec![ConditionBundle::from_frames(Mode::Monadic, vec![2; 8], None, None).unwrap(); 2];
    let faces = vec![random_face(8, 1), random_face(8, 2)];
    let cfg = SampleConfig {
        steps: 5,
        cfg_w: 1.5,
        seed: 11,
    };
    let a = run_stage2(&spec, &s2, &bundles, &faces, &norms, 8, &cfg).unwrap();
    let b = run_stage2(&spec, &s2, &bundles, &faces, &norms, 8, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].shape(), (8, BODY_DIM));
    let other = run_stage2(&spec, &s2, &bundles, &[random_face(8, 9), faces[1].clone()], &norms, 8, &cfg).unwrap();
    assert_ne!(other[0], a[0]);
}

#[test]
fn cascade_variant_mismatch_is_a_config_error() {
    let (s1, s2) = face2body_pair(FaceCond::Headrot);
    let norms = plain_norms();
    let err = CascadeSpec::face2body(FaceCond::Full).check(&s1, &s2, &norms).unwrap_err();
    assert!(matches!(err, ConditionError::Config(_)), "{err}");
    assert!(matches!(CascadeSpec::body2face().check(&s1, &s2, &norms), Err(ConditionError::Config(_))));
    assert!(matches!(CascadeSpec::face2body(FaceCond::Headrot).check(&s2, &s1, &norms), Err(ConditionError::Config(_))));
}

fn small_corpus() -> dyadic_corpus::synth::SyntheticCorpus {
    let cfg = SyntheticConfig {
        dyads: 2,
        interactions_per_dyad: 1,
        min_duration_s: 3.0,
        max_duration_s: 4.0,
        test_fraction: 0.0,
        ..SyntheticConfig::default()
    };
    generate(&cfg, 5).unwrap()
}

#[test]
fn dataset_windows_have_the_requested_length() {
    let corpus = small_corpus();
    let streams: Vec<_> = corpus.streams.iter().collect();
    let norms = Normalizers::fit(&streams).unwrap();
    for (mode, target) in [(Mode::Monadic, Target::Face), (Mode::AvDyadic, Target::Joint), (Mode::Dyadic, Target::Body)] {
        let cfg = DatasetConfig::new(mode, target, 30);
        let ds = WindowDataset::build(&streams, &cfg, &norms, None).unwrap();
        assert!(!ds.is_empty());
        for ex in &ds.examples {
            assert_eq!(ex.target.shape(), (30, target.dim()));
            assert_eq!(ex.bundle.frames(), 30);
            for b in ex.bundle.blocks() {
                assert_eq!(b.value.frames(), 30);
            }
        }
        // Both participants take the agent role.
        assert!(ds.examples.iter().any(|e| e.agent == 0) && ds.examples.iter().any(|e| e.agent == 1));
    }
}

#[test]
fn dataset_rejects_windows_longer_than_every_interaction() {
    let corpus = small_corpus();
    let streams: Vec<_> = corpus.streams.iter().collect();
    let norms = Normalizers::fit(&streams).unwrap();
    let cfg = DatasetConfig::new(Mode::Dyadic, Target::Face, 30 * 60);
    assert!(matches!(WindowDataset::build(&streams, &cfg, &norms, None), Err(ConditionError::Config(_))));
}

#[test]
fn agent_and_user_speech_swap_between_roles() {
    let corpus = small_corpus();
    let streams: Vec<_> = corpus.streams.iter().collect();
    let norms = Normalizers::fit(&streams).unwrap();
    let ds = WindowDataset::build(&streams, &DatasetConfig::new(Mode::Dyadic, Target::Face, 30), &norms, None).unwrap();
    let first = |agent| ds.examples.iter().find(|e| e.agent == agent && e.interaction == 0 && e.start == 0).unwrap();
    let (a, b) = (first(0), first(1));
    assert_eq!(a.bundle.get(A1).unwrap().value, b.bundle.get(A2).unwrap().value);
    assert_eq!(a.bundle.get(A2).unwrap().value, b.bundle.get(A1).unwrap().value);
}

#[test]
fn basis_coordinates_become_the_model_targets() {
    let corpus = small_corpus();
    let streams: Vec<_> = corpus.streams.iter().collect();
    let norms = Normalizers::fit_with_bases(&streams, Some(16), Some(24)).unwrap();
    assert_eq!(norms.motion_dim(Target::Joint), 40);
    let ds = WindowDataset::build(&streams, &DatasetConfig::new(Mode::Dyadic, Target::Joint, 30), &norms, None).unwrap();
    assert_eq!(ds.motion_dim, 40);
    assert_eq!(ds.examples[0].target.shape(), (30, 40));
    // Coordinates of a decoded frame are the coordinates we started from.
    let z = &ds.examples[0].target;
    let back = norms.encode(Target::Joint, &norms.decode(Target::Joint, z).unwrap()).unwrap();
    for (a, b) in back.data().iter().zip(z.data()) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(norms.decode(Target::Face, &Matrix::zeros(3, FACE_DIM)).is_err());
}

#[test]
fn cascade_decodes_stage_one_before_conditioning() {
    let corpus = small_corpus();
    let streams: Vec<_> = corpus.streams.iter().collect();
    let norms = Normalizers::fit_with_bases(&streams, Some(8), None).unwrap();
    let spec = CascadeSpec::face2body(FaceCond::Headrot);
    let bundle = ConditionBundle::from_frames(Mode::Monadic, vec![1; 5], None, None).unwrap();
    let z = Matrix::from_vec(5, 8, (0..40).map(|i| i as f64 * 0.1).collect());
    let b2 = spec.stage2_bundles(std::slice::from_ref(&bundle), std::slice::from_ref(&z), &norms).unwrap();
    let BlockValue::Continuous(m) = &b2[0].get(FACE_COND).unwrap().value else {
        panic!("face condition should be continuous");
    };
    let face = norms.decode(Target::Face, &z).unwrap();
    assert_eq!(m, &face.slice_cols(HEAD_ROTATION_COLS.start, HEAD_ROTATION_COLS.end));
    let s1 = model(8, vec![BlockSpec::speech(A1, 0)], 1);
    let s2 = model(BODY_DIM, vec![BlockSpec::speech(A1, 0), BlockSpec::continuous(FACE_COND, 3)], 2);
    spec.check(&s1, &s2, &norms).unwrap();
    let out = dyadic_conditioning::run_cascade(&spec, &s1, &s2, &[bundle], &norms, 5, &SampleConfig { steps: 3, cfg_w: 1.0, seed: 0 }).unwrap();
    assert_eq!((out[0].0.shape(), out[0].1.shape()), ((5, FACE_DIM), (5, BODY_DIM)));
}
