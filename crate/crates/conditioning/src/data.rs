//! Training and evaluation windows cut from interaction streams.

use dyadic_control::{av_tokens, temporal_gesture_drop, AvRange, AvSequence, GestureCodebook, GestureCondition};
use dyadic_corpus::featio::Streams;
use dyadic_features::layout::{BODY_DIM, FACE_DIM, HEAD_ROTATION_COLS, JOINT_DIM};
use dyadic_features::resample::resample_condition;
use dyadic_features::{NormStats, Pca, FPS};
use dyadic_flowmatch::TrainSource;
use dyadic_tensor::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{joint_concat, BlockValue, ConditionBundle, Mode, A1, A2, V2};
use crate::cascade::FaceCond;
use crate::model::BlockSpec;
use crate::{ConditionError, Result};

/// Block carrying the per-frame gesture condition.
pub const GESTURE: &str = "gesture";
/// Stage-two block carrying the stage-one face output.
pub const FACE_COND: &str = "face";
/// Stage-two block carrying the stage-one body output.
pub const BODY_COND: &str = "body";
pub const VALENCE: &str = "valence";
pub const AROUSAL: &str = "arousal";
/// Arousal-valence bins per axis.
pub const AV_BINS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Face,
    Body,
    Joint,
}

impl Target {
    pub fn dim(self) -> usize {
        match self {
            Self::Face => FACE_DIM,
            Self::Body => BODY_DIM,
            Self::Joint => JOINT_DIM,
        }
    }
}

/// Per-channel standardisation of face and body streams, fitted on the
/// training split, and optional principal bases the models generate in.
///
/// With a basis, a model's motion is the basis coordinates of the
/// standardised stream rather than the stream itself; conditions always stay
/// in standardised feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub face: NormStats,
    pub body: NormStats,
    #[serde(default)]
    pub face_basis: Option<Pca>,
    #[serde(default)]
    pub body_basis: Option<Pca>,
}

impl Normalizers {
    pub fn fit(streams: &[&Streams]) -> Result<Self> {
        let faces: Vec<&Matrix> = streams.iter().flat_map(|s| s.face.iter()).collect();
        let bodies: Vec<&Matrix> = streams.iter().flat_map(|s| s.body.iter()).collect();
        Ok(Self {
            face: NormStats::fit(&faces)?,
            body: NormStats::fit(&bodies)?,
            face_basis: None,
            body_basis: None,
        })
    }

    /// Fits standardisation plus principal bases of the given ranks on the
    /// standardised streams.
    pub fn fit_with_bases(streams: &[&Streams], face_rank: Option<usize>, body_rank: Option<usize>) -> Result<Self> {
        let mut out = Self::fit(streams)?;
        if let Some(k) = face_rank {
            let faces = streams
                .iter()
                .flat_map(|s| s.face.iter().map(|m| out.face.normalize(m)))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            out.face_basis = Some(Pca::fit(&faces.iter().collect::<Vec<_>>(), k)?);
        }
        if let Some(k) = body_rank {
            let bodies = streams
                .iter()
                .flat_map(|s| s.body.iter().map(|m| out.body.normalize(m)))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            out.body_basis = Some(Pca::fit(&bodies.iter().collect::<Vec<_>>(), k)?);
        }
        Ok(out)
    }

    /// Width of the motion a model of `target` generates.
    pub fn motion_dim(&self, target: Target) -> usize {
        let face = self.face_basis.as_ref().map_or(FACE_DIM, Pca::rank);
        let body = self.body_basis.as_ref().map_or(BODY_DIM, Pca::rank);
        match target {
            Target::Face => face,
            Target::Body => body,
            Target::Joint => face + body,
        }
    }

    /// Standardised target frames to model motion.
    pub fn encode(&self, target: Target, x: &Matrix) -> Result<Matrix> {
        let enc = |basis: &Option<Pca>, m: &Matrix| -> Result<Matrix> {
            Ok(match basis {
                Some(p) => p.encode(m)?,
                None => m.clone(),
            })
        };
        match target {
            Target::Face => enc(&self.face_basis, x),
            Target::Body => enc(&self.body_basis, x),
            Target::Joint => {
                let (f, b) = crate::bundle::joint_split(x)?;
                Ok(Matrix::concat_cols(&[&enc(&self.face_basis, &f)?, &enc(&self.body_basis, &b)?]))
            }
        }
    }

    /// Model motion back to standardised target frames.
    pub fn decode(&self, target: Target, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.motion_dim(target) {
            return Err(ConditionError::Shape(format!(
                "{target:?} motion has {} columns, expected {}",
                z.cols(),
                self.motion_dim(target)
            )));
        }
        let dec = |basis: &Option<Pca>, m: &Matrix| -> Result<Matrix> {
            Ok(match basis {
                Some(p) => p.decode(m)?,
                None => m.clone(),
            })
        };
        match target {
            Target::Face => dec(&self.face_basis, z),
            Target::Body => dec(&self.body_basis, z),
            Target::Joint => {
                let k = self.motion_dim(Target::Face);
                let f = dec(&self.face_basis, &z.slice_cols(0, k))?;
                let b = dec(&self.body_basis, &z.slice_cols(k, z.cols()))?;
                joint_concat(&f, &b)
            }
        }
    }

    /// Model motion back to raw feature units.
    pub fn to_raw(&self, target: Target, z: &Matrix) -> Result<Matrix> {
        Ok(self.for_target(target).denormalize(&self.decode(target, z)?)?)
    }

    pub fn for_target(&self, t: Target) -> NormStats {
        match t {
            Target::Face => self.face.clone(),
            Target::Body => self.body.clone(),
            Target::Joint => NormStats {
                mean: self.face.mean.iter().chain(&self.body.mean).copied().collect(),
                std: self.face.std.iter().chain(&self.body.std).copied().collect(),
            },
        }
    }
}

/// How the gesture block is encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureSource {
    /// Standardised body frames; dropped frames are zero rows.
    Raw,
    /// Codebook ids; dropped frames hold the null id.
    Vq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub mode: Mode,
    pub target: Target,
    pub frames: usize,
    pub stride: usize,
    /// Face condition for a body model (second stage of face-to-body).
    #[serde(default)]
    pub face_cond: Option<FaceCond>,
    /// Body condition for a face model (second stage of body-to-face).
    #[serde(default)]
    pub body_cond: bool,
    /// Per-frame gesture condition and its training drop rate.
    #[serde(default)]
    pub gesture: Option<(GestureSource, f64)>,
    /// Per-second arousal and valence tokens.
    #[serde(default)]
    pub av_control: bool,
}

impl DatasetConfig {
    pub fn new(mode: Mode, target: Target, frames: usize) -> Self {
        Self {
            mode,
            target,
            frames,
            stride: frames / 2,
            face_cond: None,
            body_cond: false,
            gesture: None,
            av_control: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.stride == 0 {
            return Err(ConditionError::Config("frames and stride must be positive".into()));
        }
        if self.face_cond.is_some() && self.target != Target::Body {
            return Err(ConditionError::Config("a face condition only applies to body models".into()));
        }
        if self.body_cond && self.target != Target::Face {
            return Err(ConditionError::Config("a body condition only applies to face models".into()));
        }
        if let Some((_, p)) = self.gesture {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConditionError::Config(format!("gesture drop {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Encoder blocks matching the bundles this configuration produces.
    pub fn blocks(&self, codebook_size: Option<usize>) -> Result<Vec<BlockSpec>> {
        let mut out = vec![BlockSpec::speech(A1, 0)];
        if matches!(self.mode, Mode::Dyadic | Mode::AvDyadic) {
            out.push(BlockSpec::speech(A2, 1));
        }
        if self.mode == Mode::AvDyadic {
            out.push(BlockSpec::continuous(V2, FACE_DIM));
        }
        if let Some(fc) = self.face_cond {
            out.push(BlockSpec::continuous(FACE_COND, fc.dim()));
        }
        if self.body_cond {
            out.push(BlockSpec::continuous(BODY_COND, BODY_DIM));
        }
        if let Some((src, _)) = self.gesture {
            out.push(match src {
                GestureSource::Raw => BlockSpec::continuous(GESTURE, BODY_DIM),
                GestureSource::Vq => {
                    let c = codebook_size
                        .ok_or_else(|| ConditionError::Config("VQ gesture condition needs a codebook".into()))?;
                    BlockSpec::categorical(GESTURE, c + 1)
                }
            });
        }
        if self.av_control {
            out.push(BlockSpec::categorical(VALENCE, AV_BINS));
            out.push(BlockSpec::categorical(AROUSAL, AV_BINS));
        }
        Ok(out)
    }
}

/// One window: the standardised target and its condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub target: Matrix,
    pub bundle: ConditionBundle,
    /// Index of the source interaction in the slice given to the builder.
    pub interaction: usize,
    /// 0 when participant A is the agent, 1 for B.
    pub agent: usize,
    pub start: usize,
}

/// Per-frame arousal-valence tokens of one participant: each frame gets the
/// token pair of the one-second window it falls in, and frames after the
/// last complete second reuse the final pair.
fn av_frame_tokens(av: &Matrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let arousal = av.column(0).iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let valence = av.column(1).iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let seq = AvSequence::new(arousal, valence)?;
    let pairs = av_tokens(&seq, AV_BINS, 1.0, FPS, AvRange::CONDITIONING)?;
    let w = FPS as usize;
    let n = av.rows();
    let (mut v, mut a) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for t in 0..n {
        let (pv, pa) = pairs[(t / w).min(pairs.len() - 1)];
        v.push(pv);
        a.push(pa);
    }
    Ok((v, a))
}

/// Standardised full-length streams of one interaction.
struct Prepared {
    speech: [Vec<u32>; 2],
    face: [Matrix; 2],
    body: [Matrix; 2],
    codes: Option<[Vec<usize>; 2]>,
    av: Option<[(Vec<usize>, Vec<usize>); 2]>,
}

fn prepare(s: &Streams, cfg: &DatasetConfig, norms: &Normalizers, codebook: Option<&GestureCodebook>) -> Result<Prepared> {
    let n = s.frames();
    let speech = [resample_condition(&s.speech[0], n)?, resample_condition(&s.speech[1], n)?];
    let face = [norms.face.normalize(&s.face[0])?, norms.face.normalize(&s.face[1])?];
    let body = [norms.body.normalize(&s.body[0])?, norms.body.normalize(&s.body[1])?];
    let codes = match (cfg.gesture, codebook) {
        (Some((GestureSource::Vq, _)), Some(cb)) => Some([cb.encode(&body[0])?, cb.encode(&body[1])?]),
        (Some((GestureSource::Vq, _)), None) => {
            return Err(ConditionError::Config("VQ gesture condition needs a codebook".into()))
        }
        _ => None,
    };
    let av = if cfg.av_control {
        let av = s
            .av
            .as_ref()
            .ok_or_else(|| ConditionError::Config("arousal-valence control needs av streams".into()))?;
        Some([av_frame_tokens(&av[0])?, av_frame_tokens(&av[1])?])
    } else {
        None
    };
    Ok(Prepared {
        speech,
        face,
        body,
        codes,
        av,
    })
}

fn window(p: &Prepared, cfg: &DatasetConfig, norms: &Normalizers, agent: usize, start: usize) -> Result<(Matrix, ConditionBundle)> {
    let user = 1 - agent;
    let r = start..start + cfg.frames;
    let face = p.face[agent].slice_rows(r.start, r.end);
    let body = p.body[agent].slice_rows(r.start, r.end);
    let target = match cfg.target {
        Target::Face => face.clone(),
        Target::Body => body.clone(),
        Target::Joint => joint_concat(&face, &body)?,
    };
    let target = norms.encode(cfg.target, &target)?;
    let mut bundle = ConditionBundle::from_frames(
        cfg.mode,
        p.speech[agent][r.clone()].to_vec(),
        Some(p.speech[user][r.clone()].to_vec()),
        Some(p.face[user].slice_rows(r.start, r.end)),
    )?;
    if let Some(fc) = cfg.face_cond {
        bundle.push(FACE_COND, BlockValue::Continuous(fc.extract(&face)?))?;
    }
    if cfg.body_cond {
        bundle.push(BODY_COND, BlockValue::Continuous(body.clone()))?;
    }
    if let Some((src, _)) = cfg.gesture {
        let v = match src {
            GestureSource::Raw => BlockValue::Continuous(body.clone()),
            GestureSource::Vq => {
                let codes = p.codes.as_ref().expect("codes prepared");
                BlockValue::Categorical(codes[agent][r.clone()].to_vec())
            }
        };
        bundle.push(GESTURE, v)?;
    }
    if let Some(av) = &p.av {
        bundle.push(VALENCE, BlockValue::Categorical(av[agent].0[r.clone()].to_vec()))?;
        bundle.push(AROUSAL, BlockValue::Categorical(av[agent].1[r].to_vec()))?;
    }
    Ok((target, bundle))
}

/// All windows of a set of interactions, both participants taking the
/// agent role.
#[derive(Clone, Debug)]
pub struct WindowDataset {
    pub config: DatasetConfig,
    /// Width of the example targets.
    pub motion_dim: usize,
    pub examples: Vec<Example>,
    /// Null id for VQ gesture blocks.
    null_id: Option<usize>,
}

impl WindowDataset {
    pub fn build(
        streams: &[&Streams],
        cfg: &DatasetConfig,
        norms: &Normalizers,
        codebook: Option<&GestureCodebook>,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut examples = Vec::new();
        for (i, s) in streams.iter().enumerate() {
            if s.frames() < cfg.frames {
                continue;
            }
            let p = prepare(s, cfg, norms, codebook)?;
            for agent in 0..2 {
                let mut start = 0;
                while start + cfg.frames <= s.frames() {
                    let (target, bundle) = window(&p, cfg, norms, agent, start)?;
                    examples.push(Example {
                        target,
                        bundle,
                        interaction: i,
                        agent,
                        start,
                    });
                    start += cfg.stride;
                }
            }
        }
        if examples.is_empty() {
            return Err(ConditionError::Config(format!(
                "no interaction is at least {} frames long",
                cfg.frames
            )));
        }
        Ok(Self {
            config: cfg.clone(),
            motion_dim: norms.motion_dim(cfg.target),
            examples,
            null_id: codebook.map(|c| c.null_id()),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Applies the training-time per-frame gesture drop to a bundle.
    pub fn drop_gesture<R: Rng + ?Sized>(&self, bundle: &mut ConditionBundle, rng: &mut R) -> Result<Vec<bool>> {
        let Some((_, p)) = self.config.gesture else {
            return Ok(vec![true; bundle.frames()]);
        };
        let block = bundle
            .get_mut(GESTURE)
            .ok_or_else(|| ConditionError::Config("bundle has no gesture block".into()))?;
        let g = match &block.value {
            BlockValue::Continuous(m) => GestureCondition::Raw(m.clone()),
            BlockValue::Categorical(ids) => GestureCondition::Codes {
                ids: ids.clone(),
                null_id: self.null_id.ok_or_else(|| ConditionError::Config("missing null id".into()))?,
            },
            BlockValue::Tokens(_) => return Err(ConditionError::Config("gesture block holds tokens".into())),
        };
        let (dropped, keep) = temporal_gesture_drop(&g, p, rng)?;
        block.value = match dropped {
            GestureCondition::Raw(m) => BlockValue::Continuous(m),
            GestureCondition::Codes { ids, .. } => BlockValue::Categorical(ids),
        };
        Ok(keep)
    }
}

impl TrainSource<ConditionBundle> for WindowDataset {
    fn draw(&self, rng: &mut ChaCha8Rng) -> dyadic_flowmatch::Result<(Matrix, ConditionBundle)> {
        let ex = &self.examples[rng.random_range(0..self.examples.len())];
        let mut bundle = ex.bundle.clone();
        self.drop_gesture(&mut bundle, rng)?;
        Ok((ex.target.clone(), bundle))
    }
}

/// Head-rotation columns of a standardised face window.
pub(crate) fn head_rotation_cols(face: &Matrix) -> Matrix {
    face.slice_cols(HEAD_ROTATION_COLS.start, HEAD_ROTATION_COLS.end)
}
