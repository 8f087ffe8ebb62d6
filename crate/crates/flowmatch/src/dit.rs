//! Diffusion-transformer velocity network.
//!
//! Pre-norm blocks with RMSNorm, rotary positions, RMS-normalised queries
//! and keys per head (KQ-Norm), and a GELU feed-forward layer. A batch is a
//! stack of equal-length sequences: `B·N` rows, sample `b` in rows
//! `b·N .. (b+1)·N`.

use dyadic_tensor::{normal, xavier, Graph, Matrix, ParamId, ParamStore, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{FlowError, Result};

const NORM_EPS: f64 = 1e-6;
const ROPE_BASE: f64 = 10_000.0;
/// Standard deviation of the output projection at initialisation. Small so
/// early predictions stay near zero, non-zero so every weight gets gradient.
const OUT_INIT_STD: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// Condition embeddings are added to the motion tokens, then full
    /// self-attention.
    #[serde(rename = "self")]
    SelfAttention,
    /// Each block attends from motion tokens to the condition sequence after
    /// its self-attention.
    Cross,
    /// Self-attention restricted to non-overlapping windows.
    WindowedSelf,
    /// Cross-attention restricted to aligned non-overlapping windows.
    WindowedCross,
}

impl AttentionKind {
    pub fn is_cross(self) -> bool {
        matches!(self, Self::Cross | Self::WindowedCross)
    }

    pub fn is_windowed(self) -> bool {
        matches!(self, Self::WindowedSelf | Self::WindowedCross)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowModelConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub heads: usize,
    pub attention: AttentionKind,
    /// Window length in frames for the windowed variants.
    pub window: usize,
    pub motion_dim: usize,
}

impl FlowModelConfig {
    /// Desk-scale default.
    pub fn toy(motion_dim: usize) -> Self {
        Self {
            layers: 4,
            hidden_dim: 256,
            ffn_dim: 1024,
            heads: 4,
            attention: AttentionKind::SelfAttention,
            window: 30,
            motion_dim,
        }
    }

    /// The full-size model: 12 layers, width 1024, FFN 4096.
    pub fn full_scale(motion_dim: usize) -> Self {
        Self {
            layers: 12,
            hidden_dim: 1024,
            ffn_dim: 4096,
            heads: 16,
            ..Self::toy(motion_dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FlowError::Config(m));
        if self.layers == 0 || self.hidden_dim == 0 || self.ffn_dim == 0 || self.motion_dim == 0 {
            return bad("layers, hidden_dim, ffn_dim and motion_dim must be positive".into());
        }
        if self.heads == 0 || self.hidden_dim % self.heads != 0 {
            return bad(format!(
                "hidden_dim {} not divisible by heads {}",
                self.hidden_dim, self.heads
            ));
        }
        if (self.hidden_dim / self.heads) % 2 != 0 {
            return bad("head dimension must be even for rotary positions".into());
        }
        if self.attention.is_windowed() && self.window == 0 {
            return bad("window must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }
}

#[derive(Clone, Debug)]
struct AttnParams {
    norm: ParamId,
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
    q_gain: ParamId,
    k_gain: ParamId,
}

#[derive(Clone, Debug)]
struct Block {
    attn: AttnParams,
    cross: Option<AttnParams>,
    ffn_norm: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Clone, Debug)]
pub struct Dit {
    cfg: FlowModelConfig,
    w_in: ParamId,
    b_in: ParamId,
    t_w1: ParamId,
    t_b1: ParamId,
    t_w2: ParamId,
    t_b2: ParamId,
    blocks: Vec<Block>,
    out_norm: ParamId,
    w_out: ParamId,
    b_out: ParamId,
}

fn attn_params<R: Rng>(store: &mut ParamStore, prefix: &str, h: usize, dh: usize, rng: &mut R) -> AttnParams {
    AttnParams {
        norm: store.add(format!("{prefix}.norm"), Matrix::filled(1, h, 1.0)),
        wq: store.add(format!("{prefix}.wq"), xavier(h, h, rng)),
        wk: store.add(format!("{prefix}.wk"), xavier(h, h, rng)),
        wv: store.add(format!("{prefix}.wv"), xavier(h, h, rng)),
        wo: store.add(format!("{prefix}.wo"), xavier(h, h, rng)),
        q_gain: store.add(format!("{prefix}.q_norm"), Matrix::filled(1, dh, 1.0)),
        k_gain: store.add(format!("{prefix}.k_norm"), Matrix::filled(1, dh, 1.0)),
    }
}

impl Dit {
    /// Registers all parameters under `prefix` in `store`.
    pub fn new<R: Rng>(cfg: FlowModelConfig, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let (h, f, d, dh) = (cfg.hidden_dim, cfg.ffn_dim, cfg.motion_dim, cfg.head_dim());
        let p = |s: &str| format!("{prefix}.{s}");
        let w_in = store.add(p("in.w"), xavier(d, h, rng));
        let b_in = store.add(p("in.b"), Matrix::zeros(1, h));
        let t_w1 = store.add(p("time.w1"), xavier(h, h, rng));
        let t_b1 = store.add(p("time.b1"), Matrix::zeros(1, h));
        let t_w2 = store.add(p("time.w2"), xavier(h, h, rng));
        let t_b2 = store.add(p("time.b2"), Matrix::zeros(1, h));
        let mut blocks = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let bp = |s: &str| format!("{prefix}.blocks.{l}.{s}");
            let attn = attn_params(store, &bp("attn"), h, dh, rng);
            let cross = cfg
                .attention
                .is_cross()
                .then(|| attn_params(store, &bp("cross"), h, dh, rng));
            blocks.push(Block {
                attn,
                cross,
                ffn_norm: store.add(bp("ffn.norm"), Matrix::filled(1, h, 1.0)),
                w1: store.add(bp("ffn.w1"), xavier(h, f, rng)),
                b1: store.add(bp("ffn.b1"), Matrix::zeros(1, f)),
                w2: store.add(bp("ffn.w2"), xavier(f, h, rng)),
                b2: store.add(bp("ffn.b2"), Matrix::zeros(1, h)),
            });
        }
        let out_norm = store.add(p("out.norm"), Matrix::filled(1, h, 1.0));
        let w_out = store.add(p("out.w"), normal(h, d, OUT_INIT_STD, rng));
        let b_out = store.add(p("out.b"), Matrix::zeros(1, d));
        Ok(Self {
            cfg,
            w_in,
            b_in,
            t_w1,
            t_b1,
            t_w2,
            t_b2,
            blocks,
            out_norm,
            w_out,
            b_out,
        })
    }

    pub fn config(&self) -> &FlowModelConfig {
        &self.cfg
    }

    /// Predicts velocities for `ts.len()` stacked sequences of `frames` rows.
    ///
    /// `cond` holds `B·frames x hidden_dim` condition embeddings, already
    /// projected and aligned. Self-attention variants add it to the motion
    /// tokens; cross variants attend to it and require it.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x_t: Var,
        ts: &[f64],
        frames: usize,
        cond: Option<Var>,
    ) -> Result<Var> {
        let b = ts.len();
        let rows = b * frames;
        let (xr, xc) = g.shape(x_t);
        if xr != rows || xc != self.cfg.motion_dim {
            return Err(FlowError::Shape(format!(
                "motion input {xr}x{xc}, expected {rows}x{}",
                self.cfg.motion_dim
            )));
        }
        if let Some(c) = cond {
            let (cr, cc) = g.shape(c);
            if cr != rows || cc != self.cfg.hidden_dim {
                return Err(FlowError::Shape(format!(
                    "condition {cr}x{cc}, expected {rows}x{} (one row per motion frame)",
                    self.cfg.hidden_dim
                )));
            }
        } else if self.cfg.attention.is_cross() {
            return Err(FlowError::Config("cross attention needs a condition sequence".into()));
        }

        let pv = |g: &mut Graph, id| g.param(store, id);
        let w_in = pv(g, self.w_in);
        let b_in = pv(g, self.b_in);
        let mut h = g.matmul(x_t, w_in);
        h = g.add_row(h, b_in);
        if let (Some(c), false) = (cond, self.cfg.attention.is_cross()) {
            h = g.add(h, c);
        }
        let temb = self.time_embedding(g, store, ts, frames);
        h = g.add(h, temb);

        let rope = Rope::new(frames, b, self.cfg.head_dim());
        let rope = (g.constant(rope.cos), g.constant(rope.sin), g.constant(rope.rot));
        for blk in &self.blocks {
            let a = self.attention(g, store, &blk.attn, h, h, b, frames, rope);
            h = g.add(h, a);
            if let (Some(cp), Some(c)) = (&blk.cross, cond) {
                let a = self.attention(g, store, cp, h, c, b, frames, rope);
                h = g.add(h, a);
            }
            let norm = pv(g, blk.ffn_norm);
            let x = g.rms_norm(h, NORM_EPS);
            let x = g.mul_row(x, norm);
            let (w1, b1, w2, b2) = (pv(g, blk.w1), pv(g, blk.b1), pv(g, blk.w2), pv(g, blk.b2));
            let u = g.matmul(x, w1);
            let u = g.add_row(u, b1);
            let u = g.gelu(u);
            let u = g.matmul(u, w2);
            let u = g.add_row(u, b2);
            h = g.add(h, u);
        }
        let norm = pv(g, self.out_norm);
        let x = g.rms_norm(h, NORM_EPS);
        let x = g.mul_row(x, norm);
        let w_out = pv(g, self.w_out);
        let b_out = pv(g, self.b_out);
        let y = g.matmul(x, w_out);
        Ok(g.add_row(y, b_out))
    }

    /// Sinusoidal features of `t` through a two-layer SiLU MLP, one row per
    /// frame.
    fn time_embedding(&self, g: &mut Graph, store: &ParamStore, ts: &[f64], frames: usize) -> Var {
        let h = self.cfg.hidden_dim;
        let half = h / 2;
        let mut feats = Matrix::zeros(ts.len(), h);
        for (i, &t) in ts.iter().enumerate() {
            let row = feats.row_mut(i);
            for k in 0..half {
                let freq = (-(ROPE_BASE.ln()) * k as f64 / half as f64).exp();
                let arg = 1000.0 * t * freq;
                row[k] = arg.cos();
                row[half + k] = arg.sin();
            }
        }
        let f = g.constant(feats);
        let (w1, b1, w2, b2) = (
            g.param(store, self.t_w1),
            g.param(store, self.t_b1),
            g.param(store, self.t_w2),
            g.param(store, self.t_b2),
        );
        let e = g.matmul(f, w1);
        let e = g.add_row(e, b1);
        let e = g.silu(e);
        let e = g.matmul(e, w2);
        let e = g.add_row(e, b2);
        let idx: Vec<usize> = (0..ts.len()).flat_map(|i| std::iter::repeat_n(i, frames)).collect();
        g.gather(e, idx)
    }

    #[allow(clippy::too_many_arguments)]
    fn attention(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        p: &AttnParams,
        h: Var,
        kv_src: Var,
        batch: usize,
        frames: usize,
        (cos, sin, rot): (Var, Var, Var),
    ) -> Var {
        let dh = self.cfg.head_dim();
        let norm = g.param(store, p.norm);
        let xq = g.rms_norm(h, NORM_EPS);
        let xq = g.mul_row(xq, norm);
        // Cross attention normalises its key/value source with the same gain.
        let xkv = if kv_src == h {
            xq
        } else {
            let x = g.rms_norm(kv_src, NORM_EPS);
            g.mul_row(x, norm)
        };
        let (wq, wk, wv, wo) = (
            g.param(store, p.wq),
            g.param(store, p.wk),
            g.param(store, p.wv),
            g.param(store, p.wo),
        );
        let q = g.matmul(xq, wq);
        let k = g.matmul(xkv, wk);
        let v = g.matmul(xkv, wv);
        let qg = g.param(store, p.q_gain);
        let kg = g.param(store, p.k_gain);
        let window = if self.cfg.attention.is_windowed() {
            self.cfg.window.min(frames).max(1)
        } else {
            frames
        };
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.cfg.heads);
        for hd in 0..self.cfg.heads {
            let (c0, c1) = (hd * dh, (hd + 1) * dh);
            let qh = g.slice_cols(q, c0, c1);
            let qh = g.rms_norm(qh, NORM_EPS);
            let qh = g.mul_row(qh, qg);
            let qh = rope_apply(g, qh, cos, sin, rot);
            let kh = g.slice_cols(k, c0, c1);
            let kh = g.rms_norm(kh, NORM_EPS);
            let kh = g.mul_row(kh, kg);
            let kh = rope_apply(g, kh, cos, sin, rot);
            let vh = g.slice_cols(v, c0, c1);
            let mut chunks = Vec::new();
            for s in 0..batch {
                let mut start = 0;
                while start < frames {
                    let end = (start + window).min(frames);
                    let (r0, r1) = (s * frames + start, s * frames + end);
                    let qs = g.slice_rows(qh, r0, r1);
                    let ks = g.slice_rows(kh, r0, r1);
                    let vs = g.slice_rows(vh, r0, r1);
                    let sc = g.matmul_nt(qs, ks);
                    let sc = g.scale(sc, scale);
                    let att = g.masked_softmax(sc, None);
                    chunks.push(g.matmul(att, vs));
                    start = end;
                }
            }
            heads.push(if chunks.len() == 1 { chunks[0] } else { g.concat_rows(&chunks) });
        }
        let cat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads) };
        g.matmul(cat, wo)
    }
}

fn rope_apply(g: &mut Graph, x: Var, cos: Var, sin: Var, rot: Var) -> Var {
    let a = g.mul(x, cos);
    let r = g.matmul(x, rot);
    let b = g.mul(r, sin);
    g.add(a, b)
}

/// Rotary position tables tiled over a batch. Pairs `(2i, 2i+1)` rotate by
/// `pos·θ_i`: `x' = x ⊙ cos + (x·R) ⊙ sin` with `R` mapping
/// `(a, b) ↦ (−b, a)`.
struct Rope {
    cos: Matrix,
    sin: Matrix,
    rot: Matrix,
}

impl Rope {
    fn new(frames: usize, batch: usize, dh: usize) -> Self {
        let mut cos = Matrix::zeros(frames * batch, dh);
        let mut sin = Matrix::zeros(frames * batch, dh);
        for r in 0..frames * batch {
            let pos = (r % frames) as f64;
            for i in 0..dh / 2 {
                let theta = ROPE_BASE.powf(-2.0 * i as f64 / dh as f64);
                let ang = pos * theta;
                for c in [2 * i, 2 * i + 1] {
                    cos.set(r, c, ang.cos());
                    sin.set(r, c, ang.sin());
                }
            }
        }
        let mut rot = Matrix::zeros(dh, dh);
        for i in 0..dh / 2 {
            // Row vector times R: out[2i] = -x[2i+1], out[2i+1] = x[2i].
            rot.set(2 * i + 1, 2 * i, -1.0);
            rot.set(2 * i, 2 * i + 1, 1.0);
        }
        Self { cos, sin, rot }
    }
}
