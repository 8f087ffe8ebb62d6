//! Training and generation at desk scale.

use dyadic_conditioning::{
    ConditionBundle, DatasetConfig, EncoderConfig, MotionModel, MotionModelConfig, Normalizers, WindowDataset,
};
use std::path::Path;

use anyhow::Context;
use dyadic_corpus::featio::{load_streams, Streams};
use dyadic_corpus::manifest::{load_manifest, CorpusManifest};
use dyadic_corpus::records::Split;
use dyadic_corpus::synth::SyntheticCorpus;
use dyadic_flowmatch::{sample_ode_batch, train, AttentionKind, FlowModelConfig, LrDecay, SampleConfig, TrainConfig, TrainReport};
use dyadic_tensor::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Model and optimisation sizes used by the experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyScale {
    pub frames: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub heads: usize,
    pub block_dim: usize,
    pub attention: AttentionKind,
    pub window: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub cond_dropout: f64,
    pub sample_steps: usize,
    pub cfg_w: f64,
    /// Sequences generated per sampler call.
    pub sample_chunk: usize,
    /// Principal components kept for face and body motion; `None` models
    /// the full standardised stream.
    pub face_rank: Option<usize>,
    pub body_rank: Option<usize>,
    /// Weight-averaging decay; see [`TrainConfig::ema`].
    pub ema: Option<f64>,
    /// Samples drawn per evaluation window.
    pub eval_draws: usize,
}

impl Default for ToyScale {
    fn default() -> Self {
        Self {
            frames: 60,
            layers: 2,
            hidden_dim: 32,
            ffn_dim: 64,
            heads: 2,
            block_dim: 16,
            attention: AttentionKind::SelfAttention,
            window: 30,
            steps: 1000,
            batch_size: 8,
            lr: 2e-3,
            cond_dropout: 0.2,
            sample_steps: 100,
            cfg_w: 1.5,
            sample_chunk: 32,
            face_rank: Some(16),
            body_rank: Some(24),
            ema: None,
            eval_draws: 1,
        }
    }
}

impl ToyScale {
    pub fn model_config(&self, ds: &DatasetConfig, motion_dim: usize, vocab: u32, codebook_size: Option<usize>) -> anyhow::Result<MotionModelConfig> {
        Ok(MotionModelConfig {
            dit: FlowModelConfig {
                layers: self.layers,
                hidden_dim: self.hidden_dim,
                ffn_dim: self.ffn_dim,
                heads: self.heads,
                attention: self.attention,
                window: self.window,
                motion_dim: motion_dim,
            },
            encoder: EncoderConfig {
                vocab,
                block_dim: self.block_dim,
                blocks: ds.blocks(codebook_size)?,
            },
            cond_dropout: self.cond_dropout,
            drop_policy: Default::default(),
            guidance_drop: Default::default(),
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            lr: self.lr,
            warmup: (self.steps / 20).max(1),
            decay: LrDecay::Cosine,
            ema: self.ema,
            seed,
            log_every: 0,
            ..TrainConfig::default()
        }
    }

    pub fn sample_config(&self, seed: u64) -> SampleConfig {
        SampleConfig {
            steps: self.sample_steps,
            cfg_w: self.cfg_w,
            seed,
        }
    }
}

/// A manifest with its feature streams in memory.
#[derive(Clone, Debug)]
pub struct CorpusData {
    pub manifest: CorpusManifest,
    /// Streams in the same order as `manifest.records`.
    pub streams: Vec<Streams>,
    /// Speech vocabulary size, silence included.
    pub vocab: u32,
}

impl CorpusData {
    pub fn from_synthetic(c: SyntheticCorpus) -> Self {
        Self {
            vocab: c.config.vocab_size,
            manifest: c.manifest,
            streams: c.streams,
        }
    }

    /// Reads `manifest.jsonl` under `dir` and every stream it references.
    /// The vocabulary comes from `synth_config.json` when present and from
    /// the largest token seen otherwise.
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let manifest = load_manifest(&dir.join("manifest.jsonl"))?;
        let streams = manifest
            .records
            .iter()
            .map(|r| load_streams(dir, r))
            .collect::<Result<Vec<_>, _>>()?;
        let seen = streams.iter().flat_map(|s| s.speech.iter().flatten()).max().map_or(1, |t| t + 1);
        let vocab = match std::fs::read_to_string(dir.join("synth_config.json")) {
            Ok(text) => {
                let v: serde_json::Value = serde_json::from_str(&text).context("synth_config.json")?;
                v["config"]["vocab_size"].as_u64().map_or(seen, |n| n as u32).max(seen)
            }
            Err(_) => seen,
        };
        Ok(Self { manifest, streams, vocab })
    }

    /// Streams of the interactions in `split`, in manifest order.
    pub fn split(&self, split: Split) -> Vec<&Streams> {
        self.manifest
            .records
            .iter()
            .zip(&self.streams)
            .filter(|(r, _)| r.split == split)
            .map(|(_, s)| s)
            .collect()
    }

    /// Interaction ids of `split`, aligned with [`CorpusData::split`].
    pub fn split_ids(&self, split: Split) -> Vec<&str> {
        self.manifest
            .records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.interaction_id.as_str())
            .collect()
    }
}

/// Builds and trains a model on `ds`. Parameter initialisation and the
/// training stream both derive from `seed`.
pub fn train_model(
    ds: &WindowDataset,
    scale: &ToyScale,
    vocab: u32,
    codebook_size: Option<usize>,
    seed: u64,
) -> anyhow::Result<(MotionModel, TrainReport)> {
    let cfg = scale.model_config(&ds.config, ds.motion_dim, vocab, codebook_size)?;
    let mut model = MotionModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let report = train(&mut model, ds, &scale.train_config(seed.wrapping_add(1)))?;
    Ok((model, report))
}

/// Samples one sequence per bundle, in chunks, with per-chunk seeds derived
/// from `seed`.
pub fn generate(model: &MotionModel, bundles: &[ConditionBundle], scale: &ToyScale, seed: u64) -> anyhow::Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(bundles.len());
    for (k, chunk) in bundles.chunks(scale.sample_chunk.max(1)).enumerate() {
        let cfg = scale.sample_config(seed.wrapping_add(k as u64 * 7919));
        out.extend(sample_ode_batch(model, chunk, scale.frames, &cfg)?);
    }
    Ok(out)
}

/// Fits normalisers and motion bases on the training split.
pub fn fit_normalizers(corpus: &CorpusData, scale: &ToyScale) -> anyhow::Result<Normalizers> {
    Ok(Normalizers::fit_with_bases(
        &corpus.split(Split::Train),
        scale.face_rank,
        scale.body_rank,
    )?)
}

/// Stacks sequences into one matrix of frames.
pub fn stack(seqs: &[Matrix]) -> Matrix {
    Matrix::concat_rows(&seqs.iter().collect::<Vec<_>>())
}
