//! The velocity-network interface used by the loss, trainer and sampler.

use dyadic_tensor::{xavier, Graph, Matrix, ParamId, ParamStore, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dit::{Dit, FlowModelConfig};
use crate::{FlowError, Result};

/// A conditional velocity field `v_θ(x_t, t, c)` with its own parameters.
///
/// `Cond` describes the condition for one sequence. Whatever it contains,
/// the model must be able to produce a "dropped" version of it for
/// classifier-free guidance.
pub trait FlowNet {
    type Cond: Clone;

    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    fn motion_dim(&self) -> usize;

    /// Builds the prediction for `conds.len()` stacked sequences of
    /// `frames` rows each.
    fn predict(&self, g: &mut Graph, x_t: Var, ts: &[f64], frames: usize, conds: &[Self::Cond]) -> Result<Var>;

    /// Condition dropout applied to each training example.
    fn train_dropout<R: Rng + ?Sized>(&self, cond: &Self::Cond, rng: &mut R) -> Self::Cond;

    /// The fully dropped condition used for the unconditioned guidance pass.
    fn unconditional(&self, cond: &Self::Cond) -> Self::Cond;

    /// Evaluates the field outside of training.
    fn velocity(&self, x_t: &Matrix, ts: &[f64], frames: usize, conds: &[Self::Cond]) -> Result<Matrix> {
        let mut g = Graph::new();
        let x = g.constant(x_t.clone());
        let v = self.predict(&mut g, x, ts, frames, conds)?;
        Ok(g.value(v).clone())
    }
}

/// Dense per-frame conditioning: an `N x cond_dim` matrix per sequence is
/// projected to the hidden width. A dropped condition is replaced by a
/// learned null embedding on every frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DitFlowConfig {
    pub dit: FlowModelConfig,
    pub cond_dim: usize,
    pub cond_dropout: f64,
}

#[derive(Clone, Debug)]
pub struct DitFlow {
    cfg: DitFlowConfig,
    store: ParamStore,
    dit: Dit,
    w_cond: ParamId,
    b_cond: ParamId,
    null: ParamId,
}

impl DitFlow {
    pub fn new<R: Rng>(cfg: DitFlowConfig, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.cond_dropout) {
            return Err(FlowError::Config(format!("cond_dropout {} outside [0, 1]", cfg.cond_dropout)));
        }
        let mut store = ParamStore::new();
        let h = cfg.dit.hidden_dim;
        let dit = Dit::new(cfg.dit.clone(), &mut store, "dit", rng)?;
        let w_cond = store.add("cond.w", xavier(cfg.cond_dim.max(1), h, rng));
        let b_cond = store.add("cond.b", Matrix::zeros(1, h));
        let null = store.add("cond.null", Matrix::zeros(1, h));
        Ok(Self {
            cfg,
            store,
            dit,
            w_cond,
            b_cond,
            null,
        })
    }

    pub fn config(&self) -> &DitFlowConfig {
        &self.cfg
    }
}

impl FlowNet for DitFlow {
    type Cond = Option<Matrix>;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn motion_dim(&self) -> usize {
        self.cfg.dit.motion_dim
    }

    fn predict(&self, g: &mut Graph, x_t: Var, ts: &[f64], frames: usize, conds: &[Self::Cond]) -> Result<Var> {
        if conds.len() != ts.len() {
            return Err(FlowError::Shape(format!("{} conditions for {} times", conds.len(), ts.len())));
        }
        let w = g.param(&self.store, self.w_cond);
        let b = g.param(&self.store, self.b_cond);
        let null = g.param(&self.store, self.null);
        let mut parts = Vec::with_capacity(conds.len());
        for c in conds {
            parts.push(match c {
                Some(m) => {
                    if m.shape() != (frames, self.cfg.cond_dim) {
                        return Err(FlowError::Shape(format!(
                            "condition {:?}, expected ({frames}, {})",
                            m.shape(),
                            self.cfg.cond_dim
                        )));
                    }
                    let c = g.constant(m.clone());
                    let e = g.matmul(c, w);
                    g.add_row(e, b)
                }
                None => g.repeat_rows(null, frames),
            });
        }
        let cond = if parts.len() == 1 { parts[0] } else { g.concat_rows(&parts) };
        self.dit.forward(g, &self.store, x_t, ts, frames, Some(cond))
    }

    fn train_dropout<R: Rng + ?Sized>(&self, cond: &Self::Cond, rng: &mut R) -> Self::Cond {
        if rng.random::<f64>() < self.cfg.cond_dropout {
            None
        } else {
            cond.clone()
        }
    }

    fn unconditional(&self, _cond: &Self::Cond) -> Self::Cond {
        None
    }
}
