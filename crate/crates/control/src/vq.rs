//! VQ-VAE gesture tokenizer.
//!
//! A one-layer temporal convolution maps body frames to latents, each
//! latent snaps to its nearest codebook entry, and a second temporal
//! convolution decodes the entries back to frames. The codebook follows an
//! exponential moving average of the latents assigned to it; the encoder
//! and decoder learn through the straight-through estimator with a
//! commitment penalty. Index `|C|` is reserved as the null condition and is
//! never produced by [`GestureCodebook::encode`].

use dyadic_tensor::{xavier, Adam, AdamConfig, Graph, Matrix, ParamId, ParamStore, Var};
use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqConfig {
    pub codebook_size: usize,
    pub latent_dim: usize,
    /// Odd temporal kernel of both convolutions.
    pub kernel: usize,
    pub steps: usize,
    /// Windows per step.
    pub batch: usize,
    /// Frames per window.
    pub window: usize,
    pub lr: f64,
    pub commitment: f64,
    pub ema_decay: f64,
    pub seed: u64,
}

impl Default for VqConfig {
    fn default() -> Self {
        Self {
            codebook_size: 64,
            latent_dim: 16,
            kernel: 3,
            steps: 600,
            batch: 4,
            window: 32,
            lr: 3e-3,
            commitment: 0.25,
            ema_decay: 0.95,
            seed: 0,
        }
    }
}

impl VqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.codebook_size < 2 {
            return Err(ControlError::Param(format!("codebook size {} < 2", self.codebook_size)));
        }
        if self.kernel % 2 == 0 {
            return Err(ControlError::Param(format!("kernel {} must be odd", self.kernel)));
        }
        if self.latent_dim == 0 || self.steps == 0 || self.batch == 0 || self.window == 0 {
            return Err(ControlError::Param("latent_dim, steps, batch and window must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(ControlError::Param(format!("ema_decay {} outside [0, 1)", self.ema_decay)));
        }
        Ok(())
    }
}

/// Per-step training losses.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VqReport {
    pub reconstruction: Vec<f64>,
    pub commitment: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Params {
    enc_w: Matrix,
    enc_b: Matrix,
    dec_w: Matrix,
    dec_b: Matrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GestureCodebook {
    config: VqConfig,
    input_dim: usize,
    params: Params,
    codebook: Matrix,
}

struct Ids {
    enc_w: ParamId,
    enc_b: ParamId,
    dec_w: ParamId,
    dec_b: ParamId,
}

fn store_of(p: &Params) -> (ParamStore, Ids) {
    let mut s = ParamStore::new();
    let ids = Ids {
        enc_w: s.add("enc.w", p.enc_w.clone()),
        enc_b: s.add("enc.b", p.enc_b.clone()),
        dec_w: s.add("dec.w", p.dec_w.clone()),
        dec_b: s.add("dec.b", p.dec_b.clone()),
    };
    (s, ids)
}

fn conv(g: &mut Graph, x: Var, w: Var, b: Var, kernel: usize) -> Var {
    let u = g.unfold(x, kernel);
    let y = g.matmul(u, w);
    g.add_row(y, b)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest row of `codebook`, ties to the lower index.
fn nearest(codebook: &Matrix, z: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for c in 0..codebook.rows() {
        let d = sq_dist(codebook.row(c), z);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

impl GestureCodebook {
    /// Trains a tokenizer on `sequences` (each `T x D`).
    pub fn fit(sequences: &[Matrix], config: VqConfig) -> Result<(Self, VqReport)> {
        config.validate()?;
        let Some(first) = sequences.first() else {
            return Err(ControlError::Param("no training sequences".into()));
        };
        let d = first.cols();
        if sequences.iter().any(|s| s.cols() != d || s.rows() == 0) {
            return Err(ControlError::Shape("training sequences differ in width or are empty".into()));
        }
        if sequences.iter().any(|s| !s.is_finite()) {
            return Err(ControlError::NonFinite("training sequences"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (k, l, c) = (config.kernel, config.latent_dim, config.codebook_size);
        let params = Params {
            enc_w: xavier(k * d, l, &mut rng),
            enc_b: Matrix::zeros(1, l),
            dec_w: xavier(k * l, d, &mut rng),
            dec_b: Matrix::zeros(1, d),
        };
        let mut this = Self {
            config: config.clone(),
            input_dim: d,
            params,
            codebook: Matrix::zeros(c, l),
        };
        this.codebook = this.seed_codebook(sequences, &mut rng);
        let (mut store, ids) = store_of(&this.params);
        let mut opt = Adam::new(
            AdamConfig {
                lr: config.lr,
                ..AdamConfig::default()
            },
            &store,
        );
        let mut counts = vec![1.0; c];
        let mut sums = this.codebook.clone();
        let mut report = VqReport::default();
        for step in 0..config.steps {
            let windows: Vec<Matrix> = (0..config.batch)
                .map(|_| {
                    let s = &sequences[rng.random_range(0..sequences.len())];
                    let w = config.window.min(s.rows());
                    let start = rng.random_range(0..=s.rows() - w);
                    s.slice_rows(start, start + w)
                })
                .collect();
            let mut g = Graph::new();
            let (ew, eb, dw, db) = (
                g.param(&store, ids.enc_w),
                g.param(&store, ids.enc_b),
                g.param(&store, ids.dec_w),
                g.param(&store, ids.dec_b),
            );
            let mut recon_terms = Vec::new();
            let mut commit_terms = Vec::new();
            let mut latents = Vec::new();
            let mut assigned = Vec::new();
            for w in &windows {
                let x = g.constant(w.clone());
                let ze = conv(&mut g, x, ew, eb, k);
                let zev = g.value(ze).clone();
                let mut q = Matrix::zeros(zev.rows(), l);
                for t in 0..zev.rows() {
                    let id = nearest(&this.codebook, zev.row(t));
                    q.row_mut(t).copy_from_slice(this.codebook.row(id));
                    assigned.push(id);
                    latents.push(zev.row(t).to_vec());
                }
                // Straight-through: forward uses q, gradient flows to z_e.
                let shift = g.constant(q.sub(&zev));
                let zq = g.add(ze, shift);
                let xh = conv(&mut g, zq, dw, db, k);
                let diff = g.sub(xh, x);
                recon_terms.push(g.mean_square(diff));
                let qc = g.constant(q);
                let cd = g.sub(ze, qc);
                commit_terms.push(g.mean_square(cd));
            }
            let recon = sum_scaled(&mut g, &recon_terms, 1.0 / windows.len() as f64);
            let commit = sum_scaled(&mut g, &commit_terms, 1.0 / windows.len() as f64);
            let weighted = g.scale(commit, config.commitment);
            let loss = g.add(recon, weighted);
            report.reconstruction.push(g.value(recon).item());
            report.commitment.push(g.value(commit).item());
            let grads = g.backward(loss);
            let pg = g.param_grads(&grads, &store);
            opt.step(&mut store, &pg);

            // Codebook EMA, with unused entries restarted on random latents.
            let gamma = config.ema_decay;
            let mut batch_counts = vec![0.0; c];
            let mut batch_sums = Matrix::zeros(c, l);
            for (z, &id) in latents.iter().zip(&assigned) {
                batch_counts[id] += 1.0;
                for (s, v) in batch_sums.row_mut(id).iter_mut().zip(z) {
                    *s += v;
                }
            }
            for id in 0..c {
                counts[id] = gamma * counts[id] + (1.0 - gamma) * batch_counts[id];
                for j in 0..l {
                    let v = gamma * sums.get(id, j) + (1.0 - gamma) * batch_sums.get(id, j);
                    sums.set(id, j, v);
                }
                if counts[id] < 1e-3 {
                    let z = &latents[rng.random_range(0..latents.len())];
                    sums.row_mut(id).copy_from_slice(z);
                    counts[id] = 1.0;
                }
                for j in 0..l {
                    this.codebook.set(id, j, sums.get(id, j) / counts[id]);
                }
            }
            if step % 100 == 0 {
                debug!("vq step {step} recon {:.5}", report.reconstruction[step]);
            }
        }
        this.params = Params {
            enc_w: store.get(ids.enc_w).clone(),
            enc_b: store.get(ids.enc_b).clone(),
            dec_w: store.get(ids.dec_w).clone(),
            dec_b: store.get(ids.dec_b).clone(),
        };
        Ok((this, report))
    }

    /// k-means++ style seeding over the initial encoder latents.
    fn seed_codebook(&self, sequences: &[Matrix], rng: &mut ChaCha8Rng) -> Matrix {
        let mut pool = Vec::new();
        for s in sequences {
            let z = self.latents(s);
            for t in 0..z.rows() {
                pool.push(z.row(t).to_vec());
            }
        }
        let c = self.config.codebook_size;
        let mut chosen = vec![pool[rng.random_range(0..pool.len())].clone()];
        let mut dist: Vec<f64> = pool.iter().map(|z| sq_dist(z, &chosen[0])).collect();
        while chosen.len() < c {
            let total: f64 = dist.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut idx = pool.len() - 1;
                for (i, &d) in dist.iter().enumerate() {
                    if u < d {
                        idx = i;
                        break;
                    }
                    u -= d;
                }
                idx
            } else {
                rng.random_range(0..pool.len())
            };
            let z = pool[pick].clone();
            for (d, p) in dist.iter_mut().zip(&pool) {
                *d = d.min(sq_dist(p, &z));
            }
            chosen.push(z);
        }
        Matrix::from_rows(&chosen)
    }

    pub fn config(&self) -> &VqConfig {
        &self.config
    }

    pub fn size(&self) -> usize {
        self.config.codebook_size
    }

    /// The reserved null-condition index, `|C|`.
    pub fn null_id(&self) -> usize {
        self.config.codebook_size
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn codebook(&self) -> &Matrix {
        &self.codebook
    }

    fn latents(&self, seq: &Matrix) -> Matrix {
        let (store, ids) = store_of(&self.params);
        let mut g = Graph::new();
        let x = g.constant(seq.clone());
        let w = g.param(&store, ids.enc_w);
        let b = g.param(&store, ids.enc_b);
        let z = conv(&mut g, x, w, b, self.config.kernel);
        g.value(z).clone()
    }

    /// Nearest codebook entry for each row of `latents`.
    pub fn quantize(&self, latents: &Matrix) -> Vec<usize> {
        (0..latents.rows()).map(|t| nearest(&self.codebook, latents.row(t))).collect()
    }

    pub fn encode(&self, seq: &Matrix) -> Result<Vec<usize>> {
        if seq.cols() != self.input_dim {
            return Err(ControlError::Shape(format!("{} columns, tokenizer expects {}", seq.cols(), self.input_dim)));
        }
        Ok(self.quantize(&self.latents(seq)))
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Matrix> {
        let l = self.config.latent_dim;
        let mut z = Matrix::zeros(ids.len(), l);
        for (t, &id) in ids.iter().enumerate() {
            if id == self.null_id() {
                return Err(ControlError::NullDecode(id));
            }
            if id > self.null_id() {
                return Err(ControlError::Param(format!("code {id} outside codebook of {}", self.size())));
            }
            z.row_mut(t).copy_from_slice(self.codebook.row(id));
        }
        let (store, idx) = store_of(&self.params);
        let mut g = Graph::new();
        let zq = g.constant(z);
        let w = g.param(&store, idx.dec_w);
        let b = g.param(&store, idx.dec_b);
        let x = conv(&mut g, zq, w, b, self.config.kernel);
        Ok(g.value(x).clone())
    }

    /// Mean squared reconstruction error per element over `sequences`.
    pub fn reconstruction_error(&self, sequences: &[Matrix]) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for s in sequences {
            let r = self.decode(&self.encode(s)?)?;
            total += r.sub(s).sum_squares();
            n += s.len();
        }
        Ok(total / n.max(1) as f64)
    }
}

fn sum_scaled(g: &mut Graph, terms: &[Var], s: f64) -> Var {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t);
    }
    g.scale(acc, s)
}
