//! Seeded synthetic dyadic corpus.
//!
//! Each dyad shares a turn-taking process at the speech rate: one speaker at
//! a time, with mutual pauses between turns so that a participant's own
//! silence does not reveal whether the partner is talking. Motion is a
//! smoothed Gaussian process plus speech-gated components:
//!
//! - the speaker's mouth, brows, head beats and arm gestures follow the
//!   emphasis level of their own tokens;
//! - the listener nods, smiles and leans in while the partner talks, with
//!   amplitude scaled by the partner's emphasis and by the coupling `κ`.
//!
//! With `κ = 0` a participant's motion carries no information about the
//! partner's speech beyond what their own speech already implies, and head
//! pitch is independent of the partner altogether.

use std::f64::consts::PI;
use std::path::Path;

use dyadic_features::layout::{BODY_JOINTS, EXPRESSION_DIM};
use dyadic_features::rotation::{axis_angle_to_matrix, Rot};
use dyadic_features::savgol::{smooth_savgol, DEFAULT_POLYORDER, DEFAULT_WINDOW};
use dyadic_features::{BodyFeatures, FaceFeatures, FPS, SPEECH_RATE};
use dyadic_tensor::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::featio::{self, Channel, Streams};
use crate::manifest::{write_manifest, CorpusManifest};
use crate::records::{
    InteractionRecord, InteractionType, IpcOctant, Part, Participant, Relationship, Split,
};
use crate::{CorpusError, Result};

/// Token id emitted while a participant is silent.
pub const SILENCE_TOKEN: u32 = 0;

/// Seed of the expression basis shared by every corpus, so corpora drawn
/// with different seeds live in the same feature space.
const BASIS_SEED: u64 = 0x0BA5_15EE_D000_0001;
const LATENTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dyads: usize,
    pub interactions_per_dyad: usize,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Strength `κ ∈ [0, 1]` of the listener response to partner speech.
    pub coupling: f64,
    pub vocab_size: u32,
    /// Fraction of dyads assigned to the test split; the rest are train.
    pub test_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dyads: 8,
            interactions_per_dyad: 4,
            min_duration_s: 12.0,
            max_duration_s: 24.0,
            coupling: 0.9,
            vocab_size: 32,
            test_fraction: 0.25,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorpusError::Config(m));
        if self.dyads == 0 || self.interactions_per_dyad == 0 {
            return bad("dyads and interactions_per_dyad must be positive".into());
        }
        if !(self.min_duration_s >= 1.0 && self.max_duration_s >= self.min_duration_s) {
            return bad(format!(
                "duration range [{}, {}] must satisfy 1 <= min <= max",
                self.min_duration_s, self.max_duration_s
            ));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return bad(format!("coupling {} outside [0, 1]", self.coupling));
        }
        if self.vocab_size < 8 {
            return bad(format!("vocab_size {} below 8", self.vocab_size));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad(format!("test_fraction {} outside [0, 1)", self.test_fraction));
        }
        Ok(())
    }
}

/// Emphasis level of a token in [0, 1]; silence has none.
pub fn emphasis(token: u32) -> f64 {
    if token == SILENCE_TOKEN {
        0.0
    } else {
        f64::from((token - 1) % 4) / 3.0
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub config: SyntheticConfig,
    pub seed: u64,
    pub manifest: CorpusManifest,
    /// Streams in the same order as `manifest.records`.
    pub streams: Vec<Streams>,
}

#[derive(Clone, Copy, Debug)]
struct Style {
    expressivity: f64,
    nod_hz: f64,
    smile: f64,
    lean: f64,
}

impl Style {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            expressivity: rng.random_range(0.8..1.2),
            nod_hz: rng.random_range(1.6..2.4),
            smile: rng.random_range(-0.3..0.3),
            lean: rng.random_range(0.7..1.3),
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Stationary AR(1) with unit marginal variance.
fn ar1(n: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut x = gauss(rng);
    let innov = (1.0 - alpha * alpha).sqrt();
    for _ in 0..n {
        out.push(x);
        x = alpha * x + innov * gauss(rng);
    }
    out
}

/// Centred moving average with truncated edges.
fn blur(x: &[f64], window: usize) -> Vec<f64> {
    let h = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Turn states at the speech rate: 0 = A talks, 1 = B talks, 2 = pause.
fn turns(ticks: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut state: u8 = rng.random_range(0..3);
    let mut out = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        out.push(state);
        state = match state {
            // Either side may take the floor after a pause, so the previous
            // speaker resumes as often as the turn switches.
            2 if rng.random::<f64>() < 0.08 => rng.random_range(0..2),
            2 => 2,
            _ if rng.random::<f64>() < 0.04 => 2,
            s => s,
        };
    }
    out
}

fn speech_tokens(states: &[u8], who: u8, vocab: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
    states
        .iter()
        .map(|&s| {
            if s == who {
                rng.random_range(1..vocab)
            } else {
                SILENCE_TOKEN
            }
        })
        .collect()
}

fn expression_basis() -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(BASIS_SEED);
    let scale = 1.0 / (LATENTS as f64).sqrt();
    Matrix::from_vec(
        LATENTS,
        EXPRESSION_DIM,
        (0..LATENTS * EXPRESSION_DIM)
            .map(|_| gauss(&mut rng) * scale)
            .collect(),
    )
}

/// Per-frame signals derived from speech that drive one participant.
struct Drive {
    talk: Vec<f64>,
    listen: Vec<f64>,
    own_emph: Vec<f64>,
    partner_emph: Vec<f64>,
}

fn drive(own: &[u32], partner: &[u32], frames: usize) -> Result<Drive> {
    let own_f = dyadic_features::resample::resample_condition(own, frames)?;
    let partner_f = dyadic_features::resample::resample_condition(partner, frames)?;
    let talk: Vec<f64> = own_f.iter().map(|&t| f64::from(u8::from(t != SILENCE_TOKEN))).collect();
    let listen: Vec<f64> = own_f
        .iter()
        .zip(&partner_f)
        .map(|(&o, &p)| f64::from(u8::from(o == SILENCE_TOKEN && p != SILENCE_TOKEN)))
        .collect();
    Ok(Drive {
        talk: blur(&talk, 7),
        listen: blur(&listen, 9),
        own_emph: blur(&own_f.iter().map(|&t| emphasis(t)).collect::<Vec<_>>(), 5),
        partner_emph: blur(&partner_f.iter().map(|&t| emphasis(t)).collect::<Vec<_>>(), 15),
    })
}

fn participant_motion(
    d: &Drive,
    style: Style,
    kappa: f64,
    basis: &Matrix,
    rng: &mut ChaCha8Rng,
) -> Result<(Matrix, Matrix, Matrix)> {
    let n = d.talk.len();
    let valence: Vec<f64> = ar1(n, 0.995, rng).iter().map(|v| (0.8 * v).tanh()).collect();
    let arousal: Vec<f64> = ar1(n, 0.995, rng).iter().map(|v| (0.8 * v).tanh()).collect();
    let phase = rng.random_range(0.0..2.0 * PI);
    let beat = ar1(n, 0.8, rng);
    let burst_l = ar1(n, 0.9, rng);
    let burst_r = ar1(n, 0.9, rng);
    let idle: Vec<Vec<f64>> = (0..12).map(|_| ar1(n, 0.97, rng)).collect();

    let mut latent = Matrix::zeros(n, LATENTS);
    let mut head = Matrix::zeros(n, 3);
    let mut trans = Matrix::zeros(n, 6);
    let mut av = Matrix::zeros(n, 2);
    let mut frames: Vec<Vec<Rot>> = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / FPS;
        let listen = d.listen[i];
        let response = kappa * listen * (0.5 + d.partner_emph[i]);
        let nod = response * (2.0 * PI * style.nod_hz * t + phase).sin();
        let speak_beat = d.talk[i] * (0.3 + d.own_emph[i]) * beat[i];
        let gesture = d.talk[i] * (0.3 + d.own_emph[i]) * (1.0 + 0.5 * arousal[i]);
        let lean = kappa * listen * style.lean;

        let lat = [
            d.talk[i] * (0.4 + 1.2 * d.own_emph[i]) + 0.1 * idle[0][i],
            style.smile + 1.2 * response + 0.5 * valence[i],
            0.8 * speak_beat,
            0.8 * lean,
            idle[1][i],
            idle[2][i],
            idle[3][i],
            idle[4][i],
        ];
        latent.row_mut(i).copy_from_slice(&lat);

        head.row_mut(i).copy_from_slice(&[
            0.15 * nod + 0.03 * idle[5][i],
            0.06 * speak_beat + 0.03 * idle[6][i],
            0.02 * idle[7][i],
        ]);
        trans.row_mut(i).copy_from_slice(&[
            0.01 * idle[8][i],
            0.01 * idle[9][i],
            0.03 * lean,
            0.005 * idle[10][i],
            0.005 * idle[11][i],
            0.02 * lean,
        ]);
        av.row_mut(i).copy_from_slice(&[arousal[i], valence[i]]);

        let bl = gesture * burst_l[i];
        let br = gesture * burst_r[i];
        let joints: Vec<Rot> = BODY_JOINTS
            .iter()
            .map(|&j| {
                let aa = match j {
                    3 | 6 | 9 => [0.05 * lean + 0.02 * idle[(j / 3) + 1][i], 0.0, 0.0],
                    12 | 15 => [0.06 * nod, 0.04 * speak_beat, 0.0],
                    13 => [0.0, 0.0, 0.02 * idle[8][i]],
                    14 => [0.0, 0.0, 0.02 * idle[9][i]],
                    16 => [0.0, 0.1 * bl, 0.25 * bl],
                    17 => [0.0, -0.1 * br, -0.25 * br],
                    18 => [0.0, 0.5 * bl, 0.0],
                    19 => [0.0, -0.5 * br, 0.0],
                    20 => [0.2 * bl, 0.0, 0.0],
                    21 => [0.2 * br, 0.0, 0.0],
                    left if left < 37 => [0.0, 0.0, 0.2 * bl + 0.05 * idle[10][i]],
                    _ => [0.0, 0.0, -0.2 * br - 0.05 * idle[11][i]],
                };
                axis_angle_to_matrix(aa)
            })
            .collect();
        frames.push(joints);
    }

    let mut expression = latent.matmul(basis).scale(style.expressivity);
    for v in expression.data_mut() {
        *v += 0.05 * gauss(rng);
    }
    let face = FaceFeatures::new(expression, head, trans)?.assembled();
    let body = BodyFeatures::from_rotations(&frames)?.assembled().clone();
    let face = smooth_savgol(&face, DEFAULT_WINDOW, DEFAULT_POLYORDER)?;
    let body = smooth_savgol(&body, DEFAULT_WINDOW, DEFAULT_POLYORDER)?;
    Ok((face, body, av))
}

const PROMPTS: [&str; 6] = [
    "Plan a weekend trip together, one of you {}.",
    "Discuss a recent film, one of you {}.",
    "Decide how to split chores, one of you {}.",
    "Talk about a childhood memory, one of you {}.",
    "Negotiate a shared budget, one of you {}.",
    "Describe your ideal job, one of you {}.",
];
const MANNERS: [&str; 8] = [
    "confidently", "timidly", "warmly", "coldly", "cheerfully", "arrogantly", "distantly", "modestly",
];

pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = expression_basis();

    let n_test = ((cfg.dyads as f64) * cfg.test_fraction).round() as usize;
    let n_test = if cfg.test_fraction > 0.0 && cfg.dyads > 1 { n_test.max(1) } else { n_test };
    let mut order: Vec<usize> = (0..cfg.dyads).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let test_dyads: Vec<usize> = order[..n_test.min(cfg.dyads)].to_vec();

    let mut manifest = CorpusManifest::default();
    let mut streams = Vec::new();
    for dyad in 0..cfg.dyads {
        let ids = [format!("P{:04}", 2 * dyad), format!("P{:04}", 2 * dyad + 1)];
        let styles = [Style::draw(&mut rng), Style::draw(&mut rng)];
        for id in &ids {
            let bfi: [f64; 5] = std::array::from_fn(|_| (rng.random_range(1.0..5.0f64) * 100.0).round() / 100.0);
            manifest.participants.push(Participant {
                participant_id: id.clone(),
                bfi2: Some(bfi),
                demographics: Default::default(),
                extra: Default::default(),
            });
        }
        let part = if dyad % 3 == 2 { Part::Improvised } else { Part::Naturalistic };
        let split = if test_dyads.contains(&dyad) { Split::Test } else { Split::Train };
        let relationship = Relationship::ALL[rng.random_range(0..Relationship::ALL.len())];
        for k in 0..cfg.interactions_per_dyad {
            let duration = (rng.random_range(cfg.min_duration_s..=cfg.max_duration_s) * 10.0).round() / 10.0;
            let frames = (duration * FPS).round() as usize;
            let ticks = (duration * SPEECH_RATE).ceil() as usize;
            let mut irng = ChaCha8Rng::seed_from_u64(seed ^ ((dyad as u64) << 32 | k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let states = turns(ticks, &mut irng);
            let speech = [
                speech_tokens(&states, 0, cfg.vocab_size, &mut irng),
                speech_tokens(&states, 1, cfg.vocab_size, &mut irng),
            ];
            let da = drive(&speech[0], &speech[1], frames)?;
            let db = drive(&speech[1], &speech[0], frames)?;
            let (fa, ba, ava) = participant_motion(&da, styles[0], cfg.coupling, &basis, &mut irng)?;
            let (fb, bb, avb) = participant_motion(&db, styles[1], cfg.coupling, &basis, &mut irng)?;

            let iid = format!("I{dyad:03}_{k:02}");
            let octants = [
                IpcOctant::ALL[rng.random_range(0..8)],
                IpcOctant::ALL[rng.random_range(0..8)],
            ];
            let prompt = PROMPTS[rng.random_range(0..PROMPTS.len())];
            let feature_refs = featio::REF_KEYS
                .iter()
                .flat_map(|(a, b)| [*a, *b])
                .map(|key| {
                    let ext = if key.starts_with("speech") { "i32" } else { "f32" };
                    (key.to_owned(), format!("features/{iid}.{key}.{ext}"))
                })
                .collect();
            manifest.records.push(InteractionRecord {
                interaction_id: iid,
                session_id: format!("S{dyad:03}"),
                participant_a: ids[0].clone(),
                participant_b: ids[1].clone(),
                part,
                split,
                relationship,
                interaction_type: InteractionType::IpcConversation,
                prompt_a: prompt.replace("{}", &format!("speaking {}", MANNERS[octants[0] as usize])),
                prompt_b: prompt.replace("{}", &format!("speaking {}", MANNERS[octants[1] as usize])),
                ipc_a: Some(octants[0]),
                ipc_b: Some(octants[1]),
                duration_s: duration,
                feature_refs,
                annotations: Vec::new(),
                qa: Vec::new(),
                extra: Default::default(),
            });
            streams.push(Streams {
                speech,
                face: [fa, fb],
                body: [ba, bb],
                av: Some([ava, avb]),
            });
        }
    }
    manifest.validate()?;
    Ok(SyntheticCorpus {
        config: cfg.clone(),
        seed,
        manifest,
        streams,
    })
}

/// Writes `manifest.jsonl`, `synth_config.json` and the feature files.
pub fn write_corpus(corpus: &SyntheticCorpus, dir: &Path) -> Result<()> {
    let feat_dir = dir.join("features");
    std::fs::create_dir_all(&feat_dir).map_err(|e| CorpusError::io(&feat_dir, e))?;
    for (r, s) in corpus.manifest.records.iter().zip(&corpus.streams) {
        let p = |key: &str| dir.join(&r.feature_refs[key]);
        featio::write_tokens(&p("speech_a"), &s.speech[0], Channel::SpeechA, SPEECH_RATE)?;
        featio::write_tokens(&p("speech_b"), &s.speech[1], Channel::SpeechB, SPEECH_RATE)?;
        featio::write_features(&p("face_a"), &s.face[0], Channel::Face, FPS)?;
        featio::write_features(&p("face_b"), &s.face[1], Channel::Face, FPS)?;
        featio::write_features(&p("body_a"), &s.body[0], Channel::Body, FPS)?;
        featio::write_features(&p("body_b"), &s.body[1], Channel::Body, FPS)?;
        if let Some(av) = &s.av {
            featio::write_features(&p("av_a"), &av[0], Channel::Av, FPS)?;
            featio::write_features(&p("av_b"), &av[1], Channel::Av, FPS)?;
        }
    }
    let mpath = dir.join("manifest.jsonl");
    let mut f = std::fs::File::create(&mpath).map_err(|e| CorpusError::io(&mpath, e))?;
    write_manifest(&corpus.manifest, &mut f).map_err(|e| CorpusError::io(&mpath, e))?;
    let cpath = dir.join("synth_config.json");
    let cfg = serde_json::json!({ "config": corpus.config, "seed": corpus.seed });
    std::fs::write(&cpath, serde_json::to_string_pretty(&cfg).expect("config serialises"))
        .map_err(|e| CorpusError::io(&cpath, e))
}

/// Generates a corpus and writes it to `dir`.
pub fn generate_synthetic_corpus(cfg: &SyntheticConfig, seed: u64, dir: &Path) -> Result<CorpusManifest> {
    let corpus = generate(cfg, seed)?;
    write_corpus(&corpus, dir)?;
    Ok(corpus.manifest)
}
