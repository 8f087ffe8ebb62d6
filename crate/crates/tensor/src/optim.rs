use crate::{Matrix, ParamGrads, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: Some(1.0),
        }
    }
}

/// Adam with decoupled weight decay over every tensor of one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, store: &ParamStore) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|(_, _, p)| Matrix::zeros(p.rows(), p.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            cfg,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Number of tensors this optimizer updates.
    pub fn num_tensors(&self) -> usize {
        self.m.len()
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// Applies one update. Returns the pre-clip global gradient norm.
    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads) -> f64 {
        assert_eq!(store.len(), self.m.len(), "optimizer/store size mismatch");
        let norm = grads.global_norm();
        let clip = match self.cfg.clip_norm {
            Some(c) if norm > c && norm > 0.0 => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
            ..
        } = self.cfg;
        for id in store.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else { continue };
            let p = store.get_mut(id);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gi = gi * clip;
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let update = (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
                *pi -= lr * (update + weight_decay * *pi);
            }
        }
        norm
    }
}
