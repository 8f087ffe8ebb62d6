//! Trained systems on disk, their generations, and the evaluation that
//! compares generations with held-out motion.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use dyadic_conditioning::{
    joint_split, run_cascade, CascadeSpec, DatasetConfig, MotionModel, MotionModelConfig, Normalizers, Target, WindowDataset,
};
use dyadic_corpus::featio::{read_features, write_features, Channel};
use dyadic_corpus::records::Split;
use dyadic_features::FPS;
use dyadic_flowmatch::{FlowNet, TrainReport};
use dyadic_metrics::{diversity, frechet_distance, DEFAULT_EPS, DEFAULT_PAIRS};
use dyadic_tensor::checkpoint;
use dyadic_tensor::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pipeline::{generate, stack, train_model, CorpusData, ToyScale};

/// Everything besides the weights needed to use a trained model again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub model: MotionModelConfig,
    pub dataset: DatasetConfig,
    pub scale: ToyScale,
    pub norms: Normalizers,
    pub vocab: u32,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub card: ModelCard,
    pub model: MotionModel,
}

impl TrainedModel {
    /// Trains on the corpus's training split.
    pub fn train(
        corpus: &CorpusData,
        dataset: DatasetConfig,
        norms: &Normalizers,
        scale: &ToyScale,
        seed: u64,
    ) -> anyhow::Result<(Self, TrainReport)> {
        let ds = WindowDataset::build(&corpus.split(Split::Train), &dataset, norms, None)?;
        if ds.is_empty() {
            bail!("no {}-frame training windows in the corpus", dataset.frames);
        }
        let (model, report) = train_model(&ds, scale, corpus.vocab, None, seed)?;
        let card = ModelCard {
            model: model.config().clone(),
            dataset,
            scale: scale.clone(),
            norms: norms.clone(),
            vocab: corpus.vocab,
            seed,
        };
        Ok((Self { card, model }, report))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let cfg = serde_json::to_value(&self.card)?;
        checkpoint::save(path, &cfg, self.model.store()).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let (cfg, store) = checkpoint::load(path).with_context(|| format!("reading {}", path.display()))?;
        let card: ModelCard = serde_json::from_value(cfg).context("checkpoint config")?;
        let mut model = MotionModel::new(card.model.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        checkpoint::restore_into(model.store_mut(), &store)?;
        Ok(Self { card, model })
    }

    pub fn target(&self) -> Target {
        self.card.dataset.target
    }
}

/// One model, or a cascade of two sharing normalisers.
pub enum System<'a> {
    Single(&'a TrainedModel),
    Cascade {
        spec: CascadeSpec,
        stage1: &'a TrainedModel,
        stage2: &'a TrainedModel,
    },
}

/// A held-out window a generation corresponds to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRef {
    pub interaction_id: String,
    pub agent: usize,
    pub start: usize,
    pub frames: usize,
}

/// Generated face and body windows in raw feature units.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub windows: Vec<WindowRef>,
    pub face: Option<Vec<Matrix>>,
    pub body: Option<Vec<Matrix>>,
}

impl System<'_> {
    fn first(&self) -> &TrainedModel {
        match self {
            Self::Single(m) => m,
            Self::Cascade { stage1, .. } => stage1,
        }
    }

    /// Generates one sample for every non-overlapping test window.
    pub fn generate(&self, corpus: &CorpusData, seed: u64) -> anyhow::Result<Generation> {
        let first = self.first();
        let card = &first.card;
        let scale = &card.scale;
        let norms = &card.norms;
        let test = corpus.split(Split::Test);
        let ids = corpus.split_ids(Split::Test);
        let cfg = DatasetConfig {
            stride: card.dataset.frames,
            ..card.dataset.clone()
        };
        let ds = WindowDataset::build(&test, &cfg, norms, None)?;
        if ds.is_empty() {
            bail!("no {}-frame test windows in the corpus", cfg.frames);
        }
        let windows = ds
            .examples
            .iter()
            .map(|e| WindowRef {
                interaction_id: ids[e.interaction].to_string(),
                agent: e.agent,
                start: e.start,
                frames: cfg.frames,
            })
            .collect();
        let bundles: Vec<_> = ds.examples.iter().map(|e| e.bundle.clone()).collect();
        let (face, body) = match self {
            Self::Single(m) => {
                let out = generate(&m.model, &bundles, scale, seed)?;
                let raw = out.iter().map(|z| norms.to_raw(m.target(), z)).collect::<Result<Vec<_>, _>>()?;
                match m.target() {
                    Target::Face => (Some(raw), None),
                    Target::Body => (None, Some(raw)),
                    Target::Joint => {
                        let (f, b): (Vec<_>, Vec<_>) = raw.iter().map(joint_split).collect::<Result<Vec<_>, _>>()?.into_iter().unzip();
                        (Some(f), Some(b))
                    }
                }
            }
            Self::Cascade { spec, stage1, stage2 } => {
                let mut face = Vec::with_capacity(bundles.len());
                let mut body = Vec::with_capacity(bundles.len());
                for (k, chunk) in bundles.chunks(scale.sample_chunk.max(1)).enumerate() {
                    let sample = scale.sample_config(seed.wrapping_add(k as u64 * 7919));
                    for (f, b) in run_cascade(spec, &stage1.model, &stage2.model, chunk, norms, scale.frames, &sample)? {
                        face.push(norms.face.denormalize(&f)?);
                        body.push(norms.body.denormalize(&b)?);
                    }
                }
                (Some(face), Some(body))
            }
        };
        Ok(Generation { windows, face, body })
    }
}

const WINDOWS_FILE: &str = "windows.jsonl";

impl Generation {
    /// Writes `windows.jsonl` plus one stacked feature file per stream.
    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut lines = String::new();
        for w in &self.windows {
            lines.push_str(&serde_json::to_string(w)?);
            lines.push('\n');
        }
        std::fs::write(dir.join(WINDOWS_FILE), lines)?;
        if let Some(f) = &self.face {
            write_features(&dir.join("face.f32"), &stack(f), Channel::Face, FPS)?;
        }
        if let Some(b) = &self.body {
            write_features(&dir.join("body.f32"), &stack(b), Channel::Body, FPS)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(dir.join(WINDOWS_FILE)).with_context(|| format!("reading {}", dir.display()))?;
        let windows: Vec<WindowRef> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        let read = |name: &str| -> anyhow::Result<Option<Vec<Matrix>>> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(None);
            }
            let (_, m) = read_features(&path)?;
            let total: usize = windows.iter().map(|w| w.frames).sum();
            if m.rows() != total {
                bail!("{} has {} frames, windows.jsonl lists {total}", path.display(), m.rows());
            }
            let mut at = 0;
            Ok(Some(
                windows
                    .iter()
                    .map(|w| {
                        at += w.frames;
                        m.slice_rows(at - w.frames, at)
                    })
                    .collect(),
            ))
        };
        Ok(Self {
            face: read("face.f32")?,
            body: read("body.f32")?,
            windows,
        })
    }
}

/// Ground-truth face and body windows matching a generation.
pub fn ground_truth(corpus: &CorpusData, windows: &[WindowRef]) -> anyhow::Result<(Vec<Matrix>, Vec<Matrix>)> {
    let index: BTreeMap<&str, usize> = corpus
        .manifest
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.interaction_id.as_str(), i))
        .collect();
    let mut face = Vec::with_capacity(windows.len());
    let mut body = Vec::with_capacity(windows.len());
    for w in windows {
        let &i = index
            .get(w.interaction_id.as_str())
            .ok_or_else(|| anyhow::anyhow!("interaction {} is not in the corpus", w.interaction_id))?;
        let s = &corpus.streams[i];
        if w.agent > 1 || w.start + w.frames > s.face[w.agent].rows() {
            bail!("window {w:?} falls outside interaction {}", w.interaction_id);
        }
        face.push(s.face[w.agent].slice_rows(w.start, w.start + w.frames));
        body.push(s.body[w.agent].slice_rows(w.start, w.start + w.frames));
    }
    Ok((face, body))
}

/// Per-run metric values of one generation, keyed by table column.
pub fn score_generation(corpus: &CorpusData, g: &Generation, seed: u64) -> anyhow::Result<BTreeMap<&'static str, f64>> {
    let (gt_face, gt_body) = ground_truth(corpus, &g.windows)?;
    let mut out = BTreeMap::new();
    if let Some(f) = &g.face {
        out.insert("FFD", frechet_distance(&stack(f), &stack(&gt_face), DEFAULT_EPS)?);
    }
    if let Some(b) = &g.body {
        out.insert("FGD", frechet_distance(&stack(b), &stack(&gt_body), DEFAULT_EPS)?);
        let pairs = (b.len() / 2).min(DEFAULT_PAIRS);
        if pairs > 0 {
            out.insert("Diversity", diversity(b, pairs, seed)?);
        }
    }
    Ok(out)
}

/// Collects per-run scores into the column lists [`MetricTable::push`]
/// expects.
///
/// [`MetricTable::push`]: dyadic_metrics::MetricTable::push
pub fn columns(runs: &[BTreeMap<&'static str, f64>]) -> Vec<(&'static str, Vec<f64>)> {
    let mut cols: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for r in runs {
        for (k, v) in r {
            cols.entry(k).or_default().push(*v);
        }
    }
    cols.into_iter().collect()
}
