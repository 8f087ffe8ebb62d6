//! Ablation experiments run on synthetic corpora at toy scale.

use std::collections::BTreeMap;

use dyadic_conditioning::{
    BlockValue, CascadeSpec, DatasetConfig, Example, FaceCond, GestureSource, Mode, Target, WindowDataset, A1, A2, GESTURE,
};
use dyadic_control::{GestureCodebook, GestureCondition, VqConfig};
use dyadic_corpus::records::Split;
use dyadic_corpus::synth::{generate, SyntheticConfig, SILENCE_TOKEN};
use dyadic_features::kinematics::keypoints;
use dyadic_features::FPS;
use dyadic_metrics::{
    boundary_smoothness, condition_following, frechet_distance, jerk, KeypointTrack, MetricTable, Space, DEFAULT_EPS, DEFAULT_SIGMA,
    DEFAULT_WINDOW,
};
use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::pipeline::{fit_normalizers, generate as sample, stack, train_model, CorpusData, ToyScale};
use crate::runs::{columns, score_generation, System, TrainedModel};

/// FFD of the monadic and dyadic face models against held-out motion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicOutcome {
    pub seed: u64,
    pub windows: usize,
    pub ffd_monadic: f64,
    pub ffd_dyadic: f64,
}

impl DyadicOutcome {
    pub fn dyadic_wins(&self) -> bool {
        self.ffd_dyadic < self.ffd_monadic
    }
}

/// Share of the frames in which the participant's speech is silent.
fn silent_share(tokens: &[u32]) -> f64 {
    tokens.iter().filter(|&&t| t == SILENCE_TOKEN).count() as f64 / tokens.len().max(1) as f64
}

fn tokens<'a>(ex: &'a Example, name: &str) -> Option<&'a [u32]> {
    match &ex.bundle.get(name)?.value {
        BlockValue::Tokens(t) => Some(t),
        _ => None,
    }
}

/// A listener window: the agent stays silent while the user talks for most
/// of it.
pub fn is_listener_window(ex: &Example) -> bool {
    let agent = tokens(ex, A1).map_or(0.0, silent_share);
    let user = tokens(ex, A2).map_or(1.0, silent_share);
    agent >= 0.9 && user <= 0.5
}

/// Trains a face model per mode on one corpus and scores both against the
/// test-split listener windows in raw feature units.
pub fn dyadic_vs_monadic(corpus_cfg: &SyntheticConfig, scale: &ToyScale, seed: u64) -> anyhow::Result<DyadicOutcome> {
    let corpus = CorpusData::from_synthetic(generate(corpus_cfg, seed)?);
    let norms = fit_normalizers(&corpus, scale)?;
    let train = corpus.split(Split::Train);
    let test = corpus.split(Split::Test);
    let test_set = |mode| {
        let cfg = DatasetConfig {
            stride: scale.frames,
            ..DatasetConfig::new(mode, Target::Face, scale.frames)
        };
        WindowDataset::build(&test, &cfg, &norms, None)
    };
    // Window order depends only on the streams, so the listener mask taken
    // from the dyadic set applies to the monadic one too.
    let listener: Vec<bool> = test_set(Mode::Dyadic)?.examples.iter().map(is_listener_window).collect();
    let windows = listener.iter().filter(|&&l| l).count();
    if windows < 2 {
        anyhow::bail!("only {windows} listener windows in the test split");
    }
    let mut ffd = [0.0; 2];
    for (k, mode) in [Mode::Monadic, Mode::Dyadic].into_iter().enumerate() {
        let train_ds = WindowDataset::build(&train, &DatasetConfig::new(mode, Target::Face, scale.frames), &norms, None)?;
        let test_ds = test_set(mode)?;
        let (model, report) = train_model(&train_ds, scale, corpus_cfg.vocab_size, None, seed.wrapping_mul(31).wrapping_add(k as u64))?;
        log::info!("{}: loss {:.3} -> {:.3}", mode.label(), report.head_mean(50), report.tail_mean(50));
        let chosen: Vec<&Example> = test_ds.examples.iter().zip(&listener).filter(|(_, &l)| l).map(|(e, _)| e).collect();
        let bundles: Vec<_> = chosen
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.bundle.clone(), scale.eval_draws.max(1)))
            .collect();
        let generated = sample(&model, &bundles, scale, seed ^ 0x5eed)?;
        let gen = norms.to_raw(Target::Face, &stack(&generated))?;
        let gt_windows: Vec<Matrix> = chosen
            .iter()
            .map(|e| test[e.interaction].face[e.agent].slice_rows(e.start, e.start + scale.frames))
            .collect();
        let gt = stack(&gt_windows);
        ffd[k] = frechet_distance(&gen, &gt, DEFAULT_EPS)?;
        log::info!("{}: ffd {:.3} over {windows} windows", mode.label(), ffd[k]);
    }
    Ok(DyadicOutcome {
        seed,
        windows,
        ffd_monadic: ffd[0],
        ffd_dyadic: ffd[1],
    })
}

/// One gesture-conditioned body model in the control comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureArm {
    pub source: GestureSource,
    pub p_drop: f64,
}

impl GestureArm {
    pub fn label(&self) -> String {
        let src = match self.source {
            GestureSource::Raw => "smpl",
            GestureSource::Vq => "vq",
        };
        format!("{src}@{}", self.p_drop)
    }
}

/// Condition-following and boundary scores of one arm, averaged over the
/// evaluation windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureScores {
    pub arm: GestureArm,
    pub following_smpl: f64,
    pub following_keypoints: f64,
    pub smoothness: f64,
    /// Mean jerk in the frames next to the segment edges, inside the
    /// segment away from them, and outside it.
    pub jerk_edges: f64,
    pub jerk_inside: f64,
    pub jerk_outside: f64,
    /// The same mean jerk over whole ground-truth windows, for scale.
    pub jerk_reference: f64,
}

/// Scores of every arm for one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureOutcome {
    pub seed: u64,
    pub windows: usize,
    pub arms: Vec<GestureScores>,
}

impl GestureOutcome {
    pub fn arm(&self, source: GestureSource, p_drop: f64) -> Option<&GestureScores> {
        self.arms.iter().find(|a| a.arm.source == source && a.arm.p_drop == p_drop)
    }
}

/// Frames of a window that carry the gesture condition at evaluation.
pub fn gesture_segment(frames: usize) -> (usize, usize) {
    (frames / 3, 2 * frames / 3)
}

/// Trains one monadic body model per arm and evaluates each on test windows
/// whose gesture condition is present only in the middle third: speech
/// drives the rest. Following error is measured inside the segment and
/// smoothness across its two edges.
pub fn gesture_control(
    corpus_cfg: &SyntheticConfig,
    scale: &ToyScale,
    arms: &[GestureArm],
    vq: &VqConfig,
    seed: u64,
) -> anyhow::Result<GestureOutcome> {
    let corpus = CorpusData::from_synthetic(generate(corpus_cfg, seed)?);
    let norms = fit_normalizers(&corpus, scale)?;
    let train = corpus.split(Split::Train);
    let test = corpus.split(Split::Test);
    let (on, off) = gesture_segment(scale.frames);
    let half = DEFAULT_WINDOW / 2;
    if on < half || off + half > scale.frames {
        anyhow::bail!("a {}-frame window leaves no smoothness margin around {on}..{off}", scale.frames);
    }
    let codebook = if arms.iter().any(|a| a.source == GestureSource::Vq) {
        let bodies: Vec<Matrix> = train.iter().flat_map(|s| s.body.iter().map(|b| norms.body.normalize(b))).collect::<Result<_, _>>()?;
        let (cb, report) = GestureCodebook::fit(&bodies, VqConfig { seed, ..vq.clone() })?;
        log::info!("vq codebook: {} codes, final loss {:.4}", cb.size(), report.reconstruction.last().copied().unwrap_or(f64::NAN));
        Some(cb)
    } else {
        None
    };
    let keep: Vec<bool> = (0..scale.frames).map(|t| (on..off).contains(&t)).collect();

    let mut scores = Vec::with_capacity(arms.len());
    let mut windows = 0;
    for (k, arm) in arms.iter().enumerate() {
        let cfg = DatasetConfig {
            gesture: Some((arm.source, arm.p_drop)),
            ..DatasetConfig::new(Mode::Monadic, Target::Body, scale.frames)
        };
        let cb = codebook.as_ref().filter(|_| arm.source == GestureSource::Vq);
        let train_ds = WindowDataset::build(&train, &cfg, &norms, cb)?;
        let test_ds = WindowDataset::build(&test, &DatasetConfig { stride: scale.frames, ..cfg.clone() }, &norms, cb)?;
        let (model, report) = train_model(
            &train_ds,
            scale,
            corpus_cfg.vocab_size,
            cb.map(|c| c.size()),
            seed.wrapping_mul(31).wrapping_add(100 + k as u64),
        )?;
        log::info!("{}: loss {:.3} -> {:.3}", arm.label(), report.head_mean(50), report.tail_mean(50));

        let mut bundles = Vec::with_capacity(test_ds.len());
        for ex in &test_ds.examples {
            let mut b = ex.bundle.clone();
            let block = b.get_mut(GESTURE).ok_or_else(|| anyhow::anyhow!("bundle has no gesture block"))?;
            let g = match &block.value {
                BlockValue::Continuous(m) => GestureCondition::Raw(m.clone()),
                BlockValue::Categorical(ids) => GestureCondition::Codes {
                    ids: ids.clone(),
                    null_id: cb.map(|c| c.null_id()).ok_or_else(|| anyhow::anyhow!("codes without a codebook"))?,
                },
                BlockValue::Tokens(_) => anyhow::bail!("gesture block holds speech tokens"),
            };
            block.value = match g.masked(&keep)? {
                GestureCondition::Raw(m) => BlockValue::Continuous(m),
                GestureCondition::Codes { ids, .. } => BlockValue::Categorical(ids),
            };
            bundles.push(b);
        }
        let generated = sample(&model, &bundles, scale, seed ^ 0x6e57)?;

        let (mut smpl, mut kp, mut smooth) = (0.0, 0.0, 0.0);
        let mut regions = [(0.0, 0usize); 4];
        for (ex, z) in test_ds.examples.iter().zip(&generated) {
            let gen = norms.to_raw(Target::Body, z)?;
            let gt = test[ex.interaction].body[ex.agent].slice_rows(ex.start, ex.start + scale.frames);
            smpl += condition_following(&gen, &gt, on, off, Space::SmplParams)?;
            kp += condition_following(&gen, &gt, on, off, Space::Keypoints)?;
            let track = KeypointTrack::new(keypoints(&gen)?, FPS)?;
            smooth += boundary_smoothness(&track, &[on, off], DEFAULT_SIGMA, DEFAULT_WINDOW)?;
            let j = jerk(&track)?;
            for t in 0..j.rows() {
                // the stencil at t spans frames t..t+3
                let edge = [on, off].iter().any(|&b| t + 3 >= b && t + 3 < b + 3);
                let region = if edge {
                    0
                } else if t >= on && t + 3 < off {
                    1
                } else {
                    2
                };
                let row = j.row(t);
                regions[region].0 += row.iter().sum::<f64>();
                regions[region].1 += row.len();
            }
            let reference = jerk(&KeypointTrack::new(keypoints(&gt)?, FPS)?)?;
            regions[3].0 += reference.mean() * reference.len() as f64;
            regions[3].1 += reference.len();
        }
        let region_mean = |k: usize| regions[k].0 / regions[k].1.max(1) as f64;
        let n = test_ds.len() as f64;
        windows = test_ds.len();
        let s = GestureScores {
            arm: *arm,
            following_smpl: smpl / n,
            following_keypoints: kp / n,
            smoothness: smooth / n,
            jerk_edges: region_mean(0),
            jerk_inside: region_mean(1),
            jerk_outside: region_mean(2),
            jerk_reference: region_mean(3),
        };
        log::info!(
            "{}: following {:.4} (keypoints {:.5}), smoothness {:.4}, jerk edges {:.0} inside {:.0} outside {:.0} reference {:.0}",
            arm.label(),
            s.following_smpl,
            s.following_keypoints,
            s.smoothness,
            s.jerk_edges,
            s.jerk_inside,
            s.jerk_outside,
            s.jerk_reference
        );
        scores.push(s);
    }
    Ok(GestureOutcome { seed, windows, arms: scores })
}

/// How face and body are produced in an ablation row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// One model generates face and body together.
    Joint,
    Face2Body,
    Body2Face,
}

impl std::str::FromStr for Structure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "joint" => Ok(Self::Joint),
            "face2body" => Ok(Self::Face2Body),
            "body2face" => Ok(Self::Body2Face),
            other => Err(format!("unknown cascade {other:?}; expected joint, face2body or body2face")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: Mode,
    pub structure: Structure,
}

impl AblationRow {
    pub fn system(&self) -> String {
        let mode = match self.mode {
            Mode::Monadic => "Monadic",
            Mode::Dyadic => "Dyadic",
            Mode::AvDyadic => "AV Dyadic",
        };
        let structure = match self.structure {
            Structure::Joint => "Face+Body",
            Structure::Face2Body => "Face2Body",
            Structure::Body2Face => "Body2Face",
        };
        format!("{mode} {structure}")
    }

    /// Condition streams: agent speech, user speech, user visual.
    pub fn conditions(&self) -> &'static str {
        match self.mode {
            Mode::Monadic => "A1",
            Mode::Dyadic => "A1+A2",
            Mode::AvDyadic => "A1+A2+V2",
        }
    }
}

/// The six systems of the standard ablation table, in row order.
pub const STANDARD_ROWS: [AblationRow; 6] = [
    AblationRow { mode: Mode::Dyadic, structure: Structure::Face2Body },
    AblationRow { mode: Mode::AvDyadic, structure: Structure::Face2Body },
    AblationRow { mode: Mode::Dyadic, structure: Structure::Body2Face },
    AblationRow { mode: Mode::Monadic, structure: Structure::Joint },
    AblationRow { mode: Mode::Dyadic, structure: Structure::Joint },
    AblationRow { mode: Mode::AvDyadic, structure: Structure::Joint },
];

/// Every mode crossed with every structure.
pub fn all_rows() -> Vec<AblationRow> {
    let modes = [Mode::Monadic, Mode::Dyadic, Mode::AvDyadic];
    let structures = [Structure::Joint, Structure::Face2Body, Structure::Body2Face];
    modes
        .iter()
        .flat_map(|&mode| structures.iter().map(move |&structure| AblationRow { mode, structure }))
        .collect()
}

/// Scores of one generation run of one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub system: String,
    pub conditions: String,
    pub run: usize,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub table: MetricTable,
    pub runs: Vec<AblationRun>,
}

/// A model seed that depends on what the model is, not on the order rows
/// ask for it.
fn model_seed(seed: u64, cfg: &DatasetConfig) -> u64 {
    let key = serde_json::to_string(cfg).expect("dataset config serialises");
    key.bytes().fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

/// Trains what `rows` need (models shared between rows are trained once),
/// generates the test set `runs` times per row and tabulates mean ± std
/// over runs.
pub fn ablate(
    corpus: &CorpusData,
    scale: &ToyScale,
    rows: &[AblationRow],
    face_cond: FaceCond,
    runs: usize,
    seed: u64,
) -> anyhow::Result<AblationReport> {
    if runs == 0 {
        anyhow::bail!("at least one generation run is needed");
    }
    let norms = fit_normalizers(corpus, scale)?;
    let mut models: BTreeMap<String, TrainedModel> = BTreeMap::new();
    let mut need = |cfg: DatasetConfig| -> anyhow::Result<String> {
        let key = serde_json::to_string(&cfg)?;
        if !models.contains_key(&key) {
            let (m, report) = TrainedModel::train(corpus, cfg.clone(), &norms, scale, model_seed(seed, &cfg))?;
            log::info!("trained {key}: loss {:.3} -> {:.3}", report.head_mean(50), report.tail_mean(50));
            models.insert(key.clone(), m);
        }
        Ok(key)
    };
    let mut plans = Vec::with_capacity(rows.len());
    for row in rows {
        let base = |target| DatasetConfig::new(row.mode, target, scale.frames);
        let keys = match row.structure {
            Structure::Joint => vec![need(base(Target::Joint))?],
            Structure::Face2Body => vec![
                need(base(Target::Face))?,
                need(DatasetConfig {
                    face_cond: Some(face_cond),
                    ..base(Target::Body)
                })?,
            ],
            Structure::Body2Face => vec![
                need(base(Target::Body))?,
                need(DatasetConfig {
                    body_cond: true,
                    ..base(Target::Face)
                })?,
            ],
        };
        plans.push((row, keys));
    }

    let mut table = MetricTable::new("Face and body generation, mean ± std over runs");
    let mut all_runs = Vec::new();
    for (row, keys) in plans {
        let system = match row.structure {
            Structure::Joint => System::Single(&models[&keys[0]]),
            Structure::Face2Body => System::Cascade {
                spec: CascadeSpec::face2body(face_cond),
                stage1: &models[&keys[0]],
                stage2: &models[&keys[1]],
            },
            Structure::Body2Face => System::Cascade {
                spec: CascadeSpec::body2face(),
                stage1: &models[&keys[0]],
                stage2: &models[&keys[1]],
            },
        };
        let mut scores = Vec::with_capacity(runs);
        for run in 0..runs {
            let run_seed = seed.wrapping_add(1000 * (run as u64 + 1));
            let g = system.generate(corpus, run_seed)?;
            let s = score_generation(corpus, &g, run_seed)?;
            all_runs.push(AblationRun {
                system: row.system(),
                conditions: row.conditions().into(),
                run,
                scores: s.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            });
            scores.push(s);
        }
        log::info!("{}: {} runs scored", row.system(), runs);
        table.push(&row.system(), row.conditions(), &columns(&scores));
    }
    Ok(AblationReport { table, runs: all_runs })
}
