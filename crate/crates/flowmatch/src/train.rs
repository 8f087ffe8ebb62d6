//! Minibatch Adam training of a [`FlowNet`].

use dyadic_tensor::{Adam, AdamConfig, Graph, Matrix};
use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loss::cfm_loss;
use crate::model::FlowNet;
use crate::schedule::Schedule;
use crate::{FlowError, Result};

/// Supplies training examples. All draws in one batch must share a length.
pub trait TrainSource<C> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(Matrix, C)>;
}

/// Learning-rate shape after warm-up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrDecay {
    #[default]
    Constant,
    /// Half-cosine from the peak rate down to 5% of it at the last step.
    Cosine,
}

impl LrDecay {
    /// Multiplier on the peak rate at `step` of `steps`, warm-up included.
    pub fn factor(self, step: usize, steps: usize, warmup: usize) -> f64 {
        if warmup > 0 && step < warmup {
            return (step + 1) as f64 / warmup as f64;
        }
        match self {
            Self::Constant => 1.0,
            Self::Cosine => {
                let span = steps.saturating_sub(warmup).max(1) as f64;
                let progress = ((step - warmup.min(step)) as f64 / span).min(1.0);
                0.05 + 0.95 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Linear warm-up length in steps.
    pub warmup: usize,
    #[serde(default)]
    pub decay: LrDecay,
    pub clip_norm: f64,
    /// Decay of an exponential moving average of the weights. When set, the
    /// averaged weights replace the raw ones once training ends.
    #[serde(default)]
    pub ema: Option<f64>,
    pub seed: u64,
    pub schedule: Schedule,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 8,
            lr: 1e-3,
            weight_decay: 0.0,
            warmup: 50,
            decay: LrDecay::Constant,
            clip_norm: 1.0,
            ema: None,
            seed: 0,
            schedule: Schedule::default(),
            log_every: 100,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss at every step.
    pub losses: Vec<f64>,
}

impl TrainReport {
    /// Mean loss over the first `n` steps.
    pub fn head_mean(&self, n: usize) -> f64 {
        mean(&self.losses[..n.min(self.losses.len())])
    }

    /// Mean loss over the last `n` steps.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let k = self.losses.len().saturating_sub(n);
        mean(&self.losses[k..])
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        f64::NAN
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Trains `model` in place. Identical seeds give identical parameters.
pub fn train<M, S>(model: &mut M, source: &S, cfg: &TrainConfig) -> Result<TrainReport>
where
    M: FlowNet,
    S: TrainSource<M::Cond>,
{
    if cfg.steps == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(FlowError::Config("steps, batch_size and lr must be positive".into()));
    }
    if cfg.ema.is_some_and(|d| !(0.0..1.0).contains(&d)) {
        return Err(FlowError::Config("ema decay must lie in [0, 1)".into()));
    }
    let mut shadow: Option<Vec<Matrix>> = cfg.ema.map(|_| model.store().iter().map(|(_, _, m)| m.clone()).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            clip_norm: Some(cfg.clip_norm),
            ..AdamConfig::default()
        },
        model.store(),
    );
    let mut report = TrainReport::default();
    for step in 0..cfg.steps {
        opt.set_lr(cfg.lr * cfg.decay.factor(step, cfg.steps, cfg.warmup));
        let mut xs = Vec::with_capacity(cfg.batch_size);
        let mut conds = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let (x, c) = source.draw(&mut rng)?;
            conds.push(model.train_dropout(&c, &mut rng));
            xs.push(x);
        }
        let mut g = Graph::new();
        let loss = cfm_loss(model, &mut g, &xs, &conds, cfg.schedule, &mut rng)?;
        let value = g.value(loss).item();
        if !value.is_finite() {
            return Err(FlowError::NonFinite { what: "loss", index: step });
        }
        let grads = g.backward(loss);
        let pg = g.param_grads(&grads, model.store());
        let norm = opt.step(model.store_mut(), &pg);
        if let (Some(decay), Some(shadow)) = (cfg.ema, shadow.as_mut()) {
            // Bias-corrected start: early steps average over what exists.
            let d = decay.min((1 + step) as f64 / (10 + step) as f64);
            for ((_, _, m), avg) in model.store().iter().zip(shadow.iter_mut()) {
                for (a, &x) in avg.data_mut().iter_mut().zip(m.data()) {
                    *a = d * *a + (1.0 - d) * x;
                }
            }
        }
        report.losses.push(value);
        if cfg.log_every > 0 && (step + 1) % cfg.log_every == 0 {
            info!("step {} loss {:.4} (last {} mean {:.4})", step + 1, value, cfg.log_every, report.tail_mean(cfg.log_every));
        }
        debug!("step {step} grad norm {norm:.4}");
    }
    if let Some(shadow) = shadow {
        let ids: Vec<_> = model.store().ids().collect();
        for (id, avg) in ids.into_iter().zip(shadow) {
            *model.store_mut().get_mut(id) = avg;
        }
    }
    Ok(report)
}
