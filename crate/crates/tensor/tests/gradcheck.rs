//! Every tape operation is checked against central finite differences.

use std::rc::Rc;

use dyadic_tensor::{checkpoint, normal, Adam, AdamConfig, Graph, Matrix, ParamStore, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Build = dyn Fn(&mut Graph, &[Var]) -> Var;

/// Checks d(loss)/d(input) for every input entry. `loss` must reduce to a
/// scalar; a fixed random projection is applied so every output entry
/// contributes.
fn check(inputs: Vec<Matrix>, build: &Build) {
    let eval = |vals: &[Matrix]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|m| g.constant(m.clone())).collect();
        let out = build(&mut g, &vars);
        let w = weights(g.shape(out));
        let wv = g.constant(w);
        let prod = g.mul(out, wv);
        let s = g.sum(prod);
        g.value(s).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|m| g.input(m.clone())).collect();
    let out = build(&mut g, &vars);
    let w = weights(g.shape(out));
    let wv = g.constant(w);
    let prod = g.mul(out, wv);
    let loss = g.sum(prod);
    let grads = g.backward(loss);
    let h = 1e-6;
    for (k, m) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[k])
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()));
        for i in 0..m.len() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.clone();
            minus[k].data_mut()[i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[i];
            let tol = 1e-6 * (1.0 + fd.abs().max(a.abs()));
            assert!(
                (fd - a).abs() < tol,
                "input {k} entry {i}: analytic {a} vs finite difference {fd}"
            );
        }
    }
}

fn weights((r, c): (usize, usize)) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|i| ((i as f64) * 1.3 + 0.2).cos()).collect())
}

fn rand(r: usize, c: usize, seed: u64) -> Matrix {
    normal(r, c, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn matmul_family() {
    check(vec![rand(3, 4, 1), rand(4, 5, 2)], &|g, v| g.matmul(v[0], v[1]));
    check(vec![rand(3, 4, 3), rand(5, 4, 4)], &|g, v| g.matmul_nt(v[0], v[1]));
}

#[test]
fn elementwise_and_broadcast() {
    check(vec![rand(3, 4, 5), rand(3, 4, 6)], &|g, v| {
        let a = g.add(v[0], v[1]);
        let b = g.sub(a, v[1]);
        let c = g.mul(b, v[1]);
        g.scale(c, 0.7)
    });
    check(vec![rand(3, 4, 7), rand(1, 4, 8)], &|g, v| {
        let a = g.add_row(v[0], v[1]);
        g.mul_row(a, v[1])
    });
    check(vec![rand(1, 4, 9)], &|g, v| g.repeat_rows(v[0], 3));
}

#[test]
fn activations() {
    check(vec![rand(3, 5, 10)], &|g, v| g.gelu(v[0]));
    check(vec![rand(3, 5, 11)], &|g, v| g.silu(v[0]));
    check(vec![rand(3, 5, 12)], &|g, v| g.tanh(v[0]));
}

#[test]
fn normalisation_and_softmax() {
    check(vec![rand(4, 6, 13)], &|g, v| g.rms_norm(v[0], 1e-6));
    check(vec![rand(4, 4, 14)], &|g, v| g.masked_softmax(v[0], None));
    let mask: Rc<[bool]> = (0..16).map(|i| (i / 4) / 2 == (i % 4) / 2).collect();
    check(vec![rand(4, 4, 15)], &move |g, v| {
        g.masked_softmax(v[0], Some(mask.clone()))
    });
}

#[test]
fn structural_ops() {
    check(vec![rand(5, 3, 16)], &|g, v| g.gather(v[0], vec![0, 2, 2, 4]));
    check(vec![rand(3, 2, 17), rand(3, 3, 18)], &|g, v| {
        let c = g.concat_cols(&[v[0], v[1]]);
        g.slice_cols(c, 1, 4)
    });
    check(vec![rand(2, 3, 19), rand(3, 3, 20)], &|g, v| {
        let c = g.concat_rows(&[v[0], v[1]]);
        g.slice_rows(c, 1, 4)
    });
    check(vec![rand(6, 2, 21)], &|g, v| g.unfold(v[0], 3));
}

#[test]
fn reductions_and_losses() {
    check(vec![rand(3, 4, 22)], &|g, v| g.mean_square(v[0]));
    check(vec![rand(4, 5, 23)], &|g, v| g.cross_entropy(v[0], vec![0, 4, 2, 2]));
}

#[test]
fn shared_parameter_gradients_accumulate() {
    let mut store = ParamStore::new();
    let id = store.add("w", Matrix::from_vec(1, 2, vec![1.0, 2.0]));
    let mut g = Graph::new();
    let a = g.param(&store, id);
    let b = g.param(&store, id);
    let s = g.add(a, b);
    let loss = g.sum(s);
    let grads = g.backward(loss);
    let pg = g.param_grads(&grads, &store);
    assert_eq!(pg.get(id).unwrap().data(), &[2.0, 2.0]);
}

#[test]
fn adam_minimises_quadratic() {
    let mut store = ParamStore::new();
    let id = store.add("x", Matrix::from_vec(1, 3, vec![3.0, -2.0, 1.0]));
    let mut opt = Adam::new(
        AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        },
        &store,
    );
    for _ in 0..2000 {
        let mut g = Graph::new();
        let x = g.param(&store, id);
        let loss = g.mean_square(x);
        let grads = g.backward(loss);
        let pg = g.param_grads(&grads, &store);
        opt.step(&mut store, &pg);
    }
    assert!(store.get(id).data().iter().all(|v| v.abs() < 1e-2));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut store = ParamStore::new();
    store.add("a", rand(3, 4, 30));
    store.add("b.bias", rand(1, 7, 31).map(|v| v * 1e-300));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let cfg = serde_json::json!({"layers": 2});
    checkpoint::save(&path, &cfg, &store).unwrap();
    let (echo, loaded) = checkpoint::load(&path).unwrap();
    assert_eq!(echo, cfg);
    for ((_, n1, m1), (_, n2, m2)) in store.iter().zip(loaded.iter()) {
        assert_eq!(n1, n2);
        let b1: Vec<u64> = m1.data().iter().map(|v| v.to_bits()).collect();
        let b2: Vec<u64> = m2.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(b1, b2);
    }
}
