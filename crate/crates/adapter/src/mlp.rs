//! The adapter head: an MLP with GELU activations.

use dyadic_tensor::{xavier, Graph, Matrix, ParamId, ParamStore, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{AdapterError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub d_model: usize,
    pub width: usize,
    /// Hidden layers before the output projection.
    pub layers: usize,
    pub classes: usize,
}

impl AdapterConfig {
    pub fn new(d_model: usize, classes: usize) -> Self {
        Self {
            d_model,
            width: 512,
            layers: 2,
            classes,
        }
    }
}

/// Trainable head. Its store holds only adapter weights; the speech model
/// that produced the hidden states is not reachable from here.
#[derive(Clone, Debug)]
pub struct Adapter {
    cfg: AdapterConfig,
    store: ParamStore,
    hidden: Vec<(ParamId, ParamId)>,
    out: (ParamId, ParamId),
}

impl Adapter {
    pub fn new<R: Rng + ?Sized>(cfg: AdapterConfig, rng: &mut R) -> Result<Self> {
        if cfg.d_model == 0 || cfg.width == 0 || cfg.classes == 0 {
            return Err(AdapterError::Domain("adapter widths must be positive".into()));
        }
        let mut store = ParamStore::new();
        let mut fan_in = cfg.d_model;
        let mut hidden = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            let w = store.add(format!("adapter.l{i}.w"), xavier(fan_in, cfg.width, rng));
            let b = store.add(format!("adapter.l{i}.b"), Matrix::zeros(1, cfg.width));
            hidden.push((w, b));
            fan_in = cfg.width;
        }
        let out = (
            store.add("adapter.out.w", xavier(fan_in, cfg.classes, rng)),
            store.add("adapter.out.b", Matrix::zeros(1, cfg.classes)),
        );
        Ok(Self { cfg, store, hidden, out })
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Logits for each row of `h`.
    pub fn forward(&self, g: &mut Graph, h: Var) -> Result<Var> {
        let (_, cols) = g.shape(h);
        if cols != self.cfg.d_model {
            return Err(AdapterError::Shape(format!(
                "hidden width {cols}, adapter expects {}",
                self.cfg.d_model
            )));
        }
        let mut x = h;
        for &(w, b) in &self.hidden {
            let (w, b) = (g.param(&self.store, w), g.param(&self.store, b));
            let y = g.matmul(x, w);
            let y = g.add_row(y, b);
            x = g.gelu(y);
        }
        let (w, b) = (g.param(&self.store, self.out.0), g.param(&self.store, self.out.1));
        let y = g.matmul(x, w);
        Ok(g.add_row(y, b))
    }

    pub fn logits(&self, h: &Matrix) -> Result<Matrix> {
        let mut g = Graph::new();
        let x = g.constant(h.clone());
        let y = self.forward(&mut g, x)?;
        Ok(g.value(y).clone())
    }

    pub fn predict(&self, h: &Matrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(h)?))
    }
}

pub(crate) fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0, |(i, _)| i)
        })
        .collect()
}
