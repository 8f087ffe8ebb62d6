//! Frozen stand-in for the speech language model.

use dyadic_tensor::{normal, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hidden::HiddenStates;
use crate::{AdapterError, Result};

/// Speech-token rate the stand-in reads, in tokens per second.
pub const LM_RATE: f64 = 12.5;

/// A randomly initialised GRU over speech tokens whose weights are never
/// trained. Its state mostly follows the last few tokens, like the local
/// content a real model's final layer carries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenSpeechLm {
    vocab: u32,
    d_model: usize,
    embed: Matrix,
    w: [Matrix; 3],
    u: [Matrix; 3],
    update_bias: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl FrozenSpeechLm {
    pub fn new(vocab: u32, d_model: usize, seed: u64) -> Result<Self> {
        if vocab == 0 || d_model == 0 {
            return Err(AdapterError::Domain("vocabulary and width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = d_model;
        let ws = 1.0 / (d as f64).sqrt();
        let embed = normal(vocab as usize, d, 1.0, &mut rng);
        let w = [0, 1, 2].map(|_| normal(d, d, ws, &mut rng));
        let u = [0, 1, 2].map(|_| normal(d, d, 0.5 * ws, &mut rng));
        Ok(Self {
            vocab,
            d_model,
            embed,
            w,
            u,
            update_bias: -1.0,
        })
    }

    pub fn vocab(&self) -> u32 {
        self.vocab
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    /// Hidden state after each token.
    pub fn hidden_states(&self, tokens: &[u32]) -> Result<HiddenStates> {
        if let Some(&t) = tokens.iter().find(|&&t| t >= self.vocab) {
            return Err(AdapterError::Data(format!("token {t} outside vocabulary {}", self.vocab)));
        }
        let d = self.d_model;
        let mut h = vec![0.0; d];
        let mut out = Vec::with_capacity(tokens.len() * d);
        let mv = |x: &[f64], m: &Matrix| -> Vec<f64> {
            (0..d).map(|j| x.iter().enumerate().map(|(i, xi)| xi * m.get(i, j)).sum()).collect()
        };
        for &t in tokens {
            let x = self.embed.row(t as usize);
            let (xz, xr, xn) = (mv(x, &self.w[0]), mv(x, &self.w[1]), mv(x, &self.w[2]));
            let (hz, hr) = (mv(&h, &self.u[0]), mv(&h, &self.u[1]));
            let z: Vec<f64> = (0..d).map(|i| sigmoid(xz[i] + hz[i] + self.update_bias)).collect();
            let r: Vec<f64> = (0..d).map(|i| sigmoid(xr[i] + hr[i])).collect();
            let rh: Vec<f64> = (0..d).map(|i| r[i] * h[i]).collect();
            let hn = mv(&rh, &self.u[2]);
            for i in 0..d {
                let n = (xn[i] + hn[i]).tanh();
                h[i] = (1.0 - z[i]) * n + z[i] * h[i];
            }
            out.extend_from_slice(&h);
        }
        HiddenStates::new(Matrix::from_vec(tokens.len(), d, out), LM_RATE)
    }
}
