use std::cell::Cell;

use dyadic_flowmatch::{
    integrate, sample_ode, sample_ode_batch, AttentionKind, DitFlow, DitFlowConfig, FlowModelConfig, FlowNet,
    Result, SampleConfig,
};
use dyadic_tensor::{Graph, Matrix, ParamStore, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A velocity field given in closed form, with a count of guided and
/// unguided evaluations.
struct Analytic<F: Fn(f64, f64, bool) -> f64> {
    store: ParamStore,
    field: F,
    cond_calls: Cell<usize>,
    uncond_calls: Cell<usize>,
}

impl<F: Fn(f64, f64, bool) -> f64> Analytic<F> {
    fn new(field: F) -> Self {
        Self {
            store: ParamStore::new(),
            field,
            cond_calls: Cell::new(0),
            uncond_calls: Cell::new(0),
        }
    }
}

impl<F: Fn(f64, f64, bool) -> f64> FlowNet for Analytic<F> {
    /// `true` for the conditioned pass.
    type Cond = bool;

    fn store(&self) -> &ParamStore {
        &self.store
    }
    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
    fn motion_dim(&self) -> usize {
        1
    }
    fn predict(&self, g: &mut Graph, x_t: Var, ts: &[f64], frames: usize, conds: &[bool]) -> Result<Var> {
        let x = g.value(x_t).clone();
        let counter = if conds[0] { &self.cond_calls } else { &self.uncond_calls };
        counter.set(counter.get() + 1);
        let mut v = Matrix::zeros(x.rows(), 1);
        for r in 0..x.rows() {
            let b = r / frames;
            v.set(r, 0, (self.field)(x.get(r, 0), ts[b], conds[b]));
        }
        Ok(g.constant(v))
    }
    fn train_dropout<R: Rng + ?Sized>(&self, c: &bool, _rng: &mut R) -> bool {
        *c
    }
    fn unconditional(&self, _c: &bool) -> bool {
        false
    }
}

fn noise(n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(n, 1, (0..n).map(|_| rng.sample(StandardNormal)).collect())
}

#[test]
fn constant_field_integrates_exactly() {
    let c = 0.75;
    let m = Analytic::new(move |_, _, _| c);
    let cfg = SampleConfig { steps: 100, cfg_w: 1.0, seed: 3 };
    let x0 = noise(20, 11);
    let x1 = integrate(&m, x0.clone(), &[true], 20, &cfg).unwrap();
    for r in 0..20 {
        assert!((x1.get(r, 0) - (x0.get(r, 0) + c)).abs() < 1e-12);
    }
}

#[test]
fn sample_starts_from_seeded_noise() {
    let m = Analytic::new(|_, _, _| 0.0);
    let cfg = SampleConfig { steps: 10, cfg_w: 1.5, seed: 42 };
    let a = sample_ode(&m, &true, 30, &cfg).unwrap();
    let b = sample_ode(&m, &true, 30, &cfg).unwrap();
    assert_eq!(a, b);
    let c = sample_ode(&m, &true, 30, &SampleConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a, c);
    // Zero field leaves the noise in place, so the output is N(0, 1) draws.
    let mean = a.mean();
    assert!(mean.abs() < 0.6, "mean {mean}");
}

/// N(0, 1) → N(μ, s²) along straight lines `x_t = (1 − t)·ε + t·(μ + s·ε)`.
/// The field is linear in x for each t and Euler follows the lines, so the
/// endpoint must equal the closed-form transport map `μ + s·ε`.
#[test]
fn gaussian_linear_flow_reaches_closed_form_endpoint() {
    let (mu, s) = (1.5, 0.4);
    let m = Analytic::new(move |x: f64, t: f64, _| {
        let eps = (x - mu * t) / (1.0 - t + t * s);
        mu + (s - 1.0) * eps
    });
    let cfg = SampleConfig { steps: 100, cfg_w: 1.0, seed: 0 };
    let x0 = noise(500, 7);
    let x1 = integrate(&m, x0.clone(), &vec![true; 500], 1, &cfg).unwrap();
    let worst = (0..500)
        .map(|r| (x1.get(r, 0) - (mu + s * x0.get(r, 0))).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "endpoint error {worst:e}");
}

#[test]
fn one_step_is_a_single_euler_jump() {
    let m = Analytic::new(|x: f64, t: f64, _| 2.0 * x + 1.0 + t);
    let cfg = SampleConfig { steps: 1, cfg_w: 1.0, seed: 0 };
    let x0 = noise(8, 1);
    let x1 = integrate(&m, x0.clone(), &[true], 8, &cfg).unwrap();
    for r in 0..8 {
        let e = x0.get(r, 0);
        assert!((x1.get(r, 0) - (e + 2.0 * e + 1.0)).abs() < 1e-12);
    }
}

#[test]
fn unit_guidance_skips_the_unconditioned_pass() {
    let m = Analytic::new(|_, _, c| if c { 1.0 } else { -1.0 });
    let cfg = SampleConfig { steps: 100, cfg_w: 1.0, seed: 0 };
    sample_ode(&m, &true, 5, &cfg).unwrap();
    assert_eq!(m.cond_calls.get(), 100);
    assert_eq!(m.uncond_calls.get(), 0);

    let m = Analytic::new(|_, _, c| if c { 1.0 } else { -1.0 });
    let cfg = SampleConfig { steps: 100, cfg_w: 1.5, seed: 0 };
    let x0 = noise(5, 2);
    let x1 = integrate(&m, x0.clone(), &[true], 5, &cfg).unwrap();
    assert_eq!(m.cond_calls.get(), 100);
    assert_eq!(m.uncond_calls.get(), 100);
    // v = −1 + 1.5·(1 − (−1)) = 2 at every step.
    for r in 0..5 {
        assert!((x1.get(r, 0) - x0.get(r, 0) - 2.0).abs() < 1e-12);
    }
}

fn dit(attention: AttentionKind, window: usize, seed: u64) -> DitFlow {
    let cfg = DitFlowConfig {
        dit: FlowModelConfig {
            layers: 2,
            hidden_dim: 16,
            ffn_dim: 32,
            heads: 2,
            attention,
            window,
            motion_dim: 3,
        },
        cond_dim: 2,
        cond_dropout: 0.2,
    };
    DitFlow::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn window_covering_the_sequence_equals_full_attention() {
    let full = dit(AttentionKind::SelfAttention, 30, 5);
    let windowed = dit(AttentionKind::WindowedSelf, 64, 5);
    let x = noise(3 * 40, 9);
    let x = Matrix::from_vec(40, 3, x.data().to_vec());
    let c = Some(Matrix::from_vec(40, 2, noise(80, 10).data().to_vec()));
    let a = full.velocity(&x, &[0.4], 40, std::slice::from_ref(&c)).unwrap();
    let b = windowed.velocity(&x, &[0.4], 40, &[c]).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
}

#[test]
fn windowed_attention_is_local() {
    let m = dit(AttentionKind::WindowedSelf, 10, 6);
    let x = Matrix::from_vec(30, 3, noise(90, 1).data().to_vec());
    let mut y = x.clone();
    for c in 0..3 {
        y.set(25, c, y.get(25, c) + 3.0);
    }
    let a = m.velocity(&x, &[0.5], 30, &[None]).unwrap();
    let b = m.velocity(&y, &[0.5], 30, &[None]).unwrap();
    assert!(a.slice_rows(0, 20).max_abs_diff(&b.slice_rows(0, 20)) < 1e-12);
    assert!(a.slice_rows(20, 30).max_abs_diff(&b.slice_rows(20, 30)) > 1e-6);
}

#[test]
fn batch_samples_match_shapes_and_reject_bad_conditions() {
    let m = dit(AttentionKind::SelfAttention, 30, 7);
    let cfg = SampleConfig { steps: 4, cfg_w: 1.5, seed: 1 };
    let out = sample_ode_batch(&m, &[None, None, None], 12, &cfg).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out.iter().all(|s| s.shape() == (12, 3)));
    let bad = Some(Matrix::zeros(11, 2));
    assert!(sample_ode(&m, &bad, 12, &cfg).is_err());
}
