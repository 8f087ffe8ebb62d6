use dyadic_control::{ControlError, GestureCodebook, VqConfig};
use dyadic_tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn two_clusters(seed: u64) -> (Vec<Matrix>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seqs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..12 {
        let centre = if i % 2 == 0 { 3.0 } else { -3.0 };
        let data = (0..40 * 6)
            .map(|_| centre + 0.05 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        seqs.push(Matrix::from_vec(40, 6, data));
        labels.push(i % 2);
    }
    (seqs, labels)
}

/// Smooth multi-frequency trajectories with a continuum of poses.
fn smooth_fixture(seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..16)
        .map(|_| {
            let freqs: Vec<f64> = (0..8).map(|_| rng.random_range(0.02..0.15)).collect();
            let phases: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..6.3)).collect();
            let mut m = Matrix::zeros(64, 8);
            for t in 0..64 {
                for c in 0..8 {
                    m.set(t, c, (freqs[c] * t as f64 * 6.283 + phases[c]).sin());
                }
            }
            m
        })
        .collect()
}

fn cfg(size: usize) -> VqConfig {
    VqConfig {
        codebook_size: size,
        latent_dim: 8,
        steps: 400,
        ..VqConfig::default()
    }
}

#[test]
fn two_separated_clusters_get_pure_codes() {
    let (seqs, labels) = two_clusters(1);
    let (vq, _) = GestureCodebook::fit(&seqs, cfg(2)).unwrap();
    let mut code_of = [None, None];
    for (s, &lab) in seqs.iter().zip(&labels) {
        for id in vq.encode(s).unwrap() {
            match code_of[lab] {
                None => code_of[lab] = Some(id),
                Some(c) => assert_eq!(c, id, "cluster {lab} split across codes"),
            }
        }
    }
    assert_ne!(code_of[0], code_of[1], "both clusters share one code");
}

#[test]
fn reconstruction_improves_with_codebook_size() {
    let data = smooth_fixture(2);
    let errors: Vec<f64> = [4, 16, 64]
        .iter()
        .map(|&c| {
            let (vq, _) = GestureCodebook::fit(&data, cfg(c)).unwrap();
            vq.reconstruction_error(&data).unwrap()
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "errors {errors:?}");
}

#[test]
fn codes_stay_below_null_and_null_does_not_decode() {
    let data = smooth_fixture(3);
    let (vq, report) = GestureCodebook::fit(&data, cfg(16)).unwrap();
    assert_eq!(report.reconstruction.len(), 400);
    assert_eq!(vq.null_id(), 16);
    for s in &data {
        assert!(vq.encode(s).unwrap().iter().all(|&i| i < vq.size()));
    }
    assert!(matches!(vq.decode(&[0, 16, 1]), Err(ControlError::NullDecode(16))));
    assert!(vq.decode(&[17]).is_err());
}

#[test]
fn quantizer_is_idempotent_on_its_own_entries() {
    let data = smooth_fixture(4);
    let (vq, _) = GestureCodebook::fit(&data, cfg(16)).unwrap();
    let ids = vq.quantize(vq.codebook());
    assert_eq!(ids, (0..16).collect::<Vec<_>>());
    // Re-quantizing quantized latents changes nothing.
    let s = &data[0];
    let codes = vq.encode(s).unwrap();
    let z = Matrix::from_rows(&codes.iter().map(|&c| vq.codebook().row(c).to_vec()).collect::<Vec<_>>());
    assert_eq!(vq.quantize(&z), codes);
}

#[test]
fn fitting_is_deterministic_and_serializable() {
    let data = smooth_fixture(5);
    let mut c = cfg(4);
    c.steps = 30;
    let (a, _) = GestureCodebook::fit(&data, c.clone()).unwrap();
    let (b, _) = GestureCodebook::fit(&data, c).unwrap();
    assert_eq!(a.codebook(), b.codebook());
    let json = serde_json::to_string(&a).unwrap();
    let back: GestureCodebook = serde_json::from_str(&json).unwrap();
    assert_eq!(back.encode(&data[1]).unwrap(), a.encode(&data[1]).unwrap());
}
