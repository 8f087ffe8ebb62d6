//! The conditioned velocity network.

use dyadic_flowmatch::{Dit, FlowError, FlowModelConfig, FlowNet};
use dyadic_tensor::{normal, xavier, Graph, Matrix, ParamId, ParamStore, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{condition_dropout, Block, BlockValue, ConditionBundle, A1, A2};
use crate::{ConditionError, Result};

/// Standard deviation of the initial null embeddings. Non-zero so that a
/// dropped block is distinguishable from an all-zero embedding from the
/// first step.
const NULL_INIT_STD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BlockKind {
    /// Tokens through the shared speech table plus a per-channel tag.
    Speech { channel: usize },
    /// A linear map from `dim` features.
    Continuous { dim: usize },
    /// A table of `classes` rows.
    Categorical { classes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub kind: BlockKind,
}

impl BlockSpec {
    pub fn speech(name: &str, channel: usize) -> Self {
        Self {
            name: name.into(),
            kind: BlockKind::Speech { channel },
        }
    }

    pub fn continuous(name: &str, dim: usize) -> Self {
        Self {
            name: name.into(),
            kind: BlockKind::Continuous { dim },
        }
    }

    pub fn categorical(name: &str, classes: usize) -> Self {
        Self {
            name: name.into(),
            kind: BlockKind::Categorical { classes },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab: u32,
    /// Width of each block's embedding before concatenation.
    pub block_dim: usize,
    pub blocks: Vec<BlockSpec>,
}

/// How training-time condition dropout treats the blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropPolicy {
    /// Each block is dropped on its own coin.
    #[default]
    Independent,
    /// One coin drops every block together.
    Joint,
}

/// Which blocks the unconditioned guidance pass removes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceDrop {
    #[default]
    All,
    /// Only the speech blocks; controls and visual blocks stay.
    SpeechOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionModelConfig {
    pub dit: FlowModelConfig,
    pub encoder: EncoderConfig,
    pub cond_dropout: f64,
    #[serde(default)]
    pub drop_policy: DropPolicy,
    #[serde(default)]
    pub guidance_drop: GuidanceDrop,
}

impl MotionModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.dit.validate()?;
        if !(0.0..=1.0).contains(&self.cond_dropout) {
            return Err(ConditionError::Config(format!("cond_dropout {} outside [0, 1]", self.cond_dropout)));
        }
        let e = &self.encoder;
        if e.blocks.is_empty() || e.block_dim == 0 {
            return Err(ConditionError::Config("encoder needs at least one block and a positive width".into()));
        }
        let mut names: Vec<&str> = e.blocks.iter().map(|b| b.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != e.blocks.len() {
            return Err(ConditionError::Config("duplicate block names".into()));
        }
        for b in &e.blocks {
            match b.kind {
                BlockKind::Speech { .. } if e.vocab == 0 => {
                    return Err(ConditionError::Config("speech block with an empty vocabulary".into()))
                }
                BlockKind::Continuous { dim: 0 } | BlockKind::Categorical { classes: 0 } => {
                    return Err(ConditionError::Config(format!("block {} has zero width", b.name)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn block(&self, name: &str) -> Option<&BlockSpec> {
        self.encoder.blocks.iter().find(|b| b.name == name)
    }
}

#[derive(Clone, Debug)]
struct BlockParams {
    null: ParamId,
    /// Table or projection weight.
    w: Option<ParamId>,
    b: Option<ParamId>,
    tag: Option<ParamId>,
}

#[derive(Clone, Debug)]
pub struct MotionModel {
    cfg: MotionModelConfig,
    store: ParamStore,
    dit: Dit,
    speech_table: Option<ParamId>,
    blocks: Vec<BlockParams>,
    proj_w: ParamId,
    proj_b: ParamId,
}

impl MotionModel {
    pub fn new<R: Rng>(cfg: MotionModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let dit = Dit::new(cfg.dit.clone(), &mut store, "dit", rng)?;
        let e = cfg.encoder.block_dim;
        let has_speech = cfg.encoder.blocks.iter().any(|b| matches!(b.kind, BlockKind::Speech { .. }));
        let speech_table =
            has_speech.then(|| store.add("cond.speech.table", normal(cfg.encoder.vocab as usize, e, 1.0, rng)));
        let mut blocks = Vec::new();
        for spec in &cfg.encoder.blocks {
            let p = |s: &str| format!("cond.{}.{s}", spec.name);
            let null = store.add(p("null"), normal(1, e, NULL_INIT_STD, rng));
            let params = match spec.kind {
                BlockKind::Speech { .. } => BlockParams {
                    null,
                    w: None,
                    b: None,
                    tag: Some(store.add(p("tag"), normal(1, e, 1.0, rng))),
                },
                BlockKind::Continuous { dim } => BlockParams {
                    null,
                    w: Some(store.add(p("w"), xavier(dim, e, rng))),
                    b: Some(store.add(p("b"), Matrix::zeros(1, e))),
                    tag: None,
                },
                BlockKind::Categorical { classes } => BlockParams {
                    null,
                    w: Some(store.add(p("table"), normal(classes, e, 1.0, rng))),
                    b: None,
                    tag: None,
                },
            };
            blocks.push(params);
        }
        let width = e * cfg.encoder.blocks.len();
        let proj_w = store.add("cond.proj.w", xavier(width, cfg.dit.hidden_dim, rng));
        let proj_b = store.add("cond.proj.b", Matrix::zeros(1, cfg.dit.hidden_dim));
        Ok(Self {
            cfg,
            store,
            dit,
            speech_table,
            blocks,
            proj_w,
            proj_b,
        })
    }

    pub fn config(&self) -> &MotionModelConfig {
        &self.cfg
    }

    /// The registered null embedding of block `name`.
    pub fn null_embedding(&self, name: &str) -> Option<&Matrix> {
        let i = self.cfg.encoder.blocks.iter().position(|b| b.name == name)?;
        Some(self.store.get(self.blocks[i].null))
    }

    /// Embeds one block to `N x block_dim`.
    pub fn embed_block(&self, g: &mut Graph, block: &Block, frames: usize) -> Result<Var> {
        let i = self
            .cfg
            .encoder
            .blocks
            .iter()
            .position(|b| b.name == block.name)
            .ok_or_else(|| ConditionError::Config(format!("model has no block {}", block.name)))?;
        let spec = &self.cfg.encoder.blocks[i];
        let params = &self.blocks[i];
        if block.dropped {
            let null = g.param(&self.store, params.null);
            return Ok(g.repeat_rows(null, frames));
        }
        match (&spec.kind, &block.value) {
            (BlockKind::Speech { .. }, BlockValue::Tokens(tokens)) => {
                let vocab = self.cfg.encoder.vocab;
                if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab) {
                    return Err(ConditionError::Shape(format!("token {bad} outside vocabulary {vocab}")));
                }
                let table = g.param(&self.store, self.speech_table.expect("speech table exists"));
                let idx: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
                let e = g.gather(table, idx);
                let tag = g.param(&self.store, params.tag.expect("speech tag exists"));
                Ok(g.add_row(e, tag))
            }
            (BlockKind::Continuous { dim }, BlockValue::Continuous(m)) => {
                if m.cols() != *dim {
                    return Err(ConditionError::Shape(format!(
                        "block {} has {} columns, model expects {dim}",
                        block.name,
                        m.cols()
                    )));
                }
                let x = g.constant(m.clone());
                let w = g.param(&self.store, params.w.expect("projection exists"));
                let b = g.param(&self.store, params.b.expect("bias exists"));
                let y = g.matmul(x, w);
                Ok(g.add_row(y, b))
            }
            (BlockKind::Categorical { classes }, BlockValue::Categorical(ids)) => {
                if let Some(&bad) = ids.iter().find(|&&c| c >= *classes) {
                    return Err(ConditionError::Shape(format!("class {bad} outside {classes} in block {}", block.name)));
                }
                let table = g.param(&self.store, params.w.expect("table exists"));
                Ok(g.gather(table, ids.clone()))
            }
            (kind, _) => Err(ConditionError::Config(format!(
                "block {} value does not match its {kind:?} specification",
                block.name
            ))),
        }
    }

    /// The `N x hidden` condition embedding of one bundle.
    pub fn embed(&self, g: &mut Graph, bundle: &ConditionBundle) -> Result<Var> {
        let names: Vec<&str> = self.cfg.encoder.blocks.iter().map(|b| b.name.as_str()).collect();
        if bundle.names() != names {
            return Err(ConditionError::Config(format!(
                "bundle blocks {:?} do not match model blocks {names:?}",
                bundle.names()
            )));
        }
        let n = bundle.frames();
        let parts = bundle
            .blocks()
            .iter()
            .map(|b| self.embed_block(g, b, n))
            .collect::<Result<Vec<_>>>()?;
        let cat = if parts.len() == 1 { parts[0] } else { g.concat_cols(&parts) };
        let w = g.param(&self.store, self.proj_w);
        let b = g.param(&self.store, self.proj_b);
        let y = g.matmul(cat, w);
        Ok(g.add_row(y, b))
    }
}

impl FlowNet for MotionModel {
    type Cond = ConditionBundle;

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn motion_dim(&self) -> usize {
        self.cfg.dit.motion_dim
    }

    fn predict(
        &self,
        g: &mut Graph,
        x_t: Var,
        ts: &[f64],
        frames: usize,
        conds: &[ConditionBundle],
    ) -> dyadic_flowmatch::Result<Var> {
        if conds.len() != ts.len() {
            return Err(FlowError::Shape(format!("{} bundles for {} times", conds.len(), ts.len())));
        }
        let mut parts = Vec::with_capacity(conds.len());
        for c in conds {
            if c.frames() != frames {
                return Err(FlowError::Shape(format!("bundle has {} frames, motion has {frames}", c.frames())));
            }
            parts.push(self.embed(g, c)?);
        }
        let cond = if parts.len() == 1 { parts[0] } else { g.concat_rows(&parts) };
        self.dit.forward(g, &self.store, x_t, ts, frames, Some(cond))
    }

    fn train_dropout<R: Rng + ?Sized>(&self, cond: &ConditionBundle, rng: &mut R) -> ConditionBundle {
        match self.cfg.drop_policy {
            DropPolicy::Independent => {
                condition_dropout(cond, self.cfg.cond_dropout, rng).expect("rate validated at construction")
            }
            DropPolicy::Joint => {
                let drop = rng.random::<f64>() < self.cfg.cond_dropout;
                let mut out = cond.clone();
                for b in out.blocks_mut() {
                    b.dropped = drop;
                }
                out
            }
        }
    }

    fn unconditional(&self, cond: &ConditionBundle) -> ConditionBundle {
        match self.cfg.guidance_drop {
            GuidanceDrop::All => cond.all_dropped(),
            GuidanceDrop::SpeechOnly => {
                let mut out = cond.clone();
                for b in out.blocks_mut() {
                    if b.name == A1 || b.name == A2 {
                        b.dropped = true;
                    }
                }
                out
            }
        }
    }
}
