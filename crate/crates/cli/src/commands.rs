//! Command handlers. Every command writes `run_config.json` next to its
//! outputs, prints a human-readable table and writes structured reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use dyadic_adapter::{
    evaluate as evaluate_adapter, gesture_fixture, pairs_from_fixture, rate_sweep, train_adapter, Adapter, AdapterTrainConfig,
    CodeStream, FixtureConfig, FrozenSpeechLm,
};
use dyadic_conditioning::{CascadeSpec, DatasetConfig, FaceCond, Mode, Target};
use dyadic_control::buckets::{fit_thresholds, Scheme};
use dyadic_control::dynamism::{dynamism, moving_average};
use dyadic_control::signals::head_rotation;
use dyadic_corpus::manifest::{load_manifest, CorpusManifest};
use dyadic_corpus::records::Split;
use dyadic_corpus::splits::validate_splits;
use dyadic_corpus::stats::compute_stats;
use dyadic_corpus::synth::{generate_synthetic_corpus, SyntheticConfig};
use dyadic_corpus::text::{flesch_reading_ease, mtld, words};
use dyadic_humaneval::server::{serve, AppState};
use dyadic_humaneval::{
    aggregate_with, build_items, export_deltas, CiMethod, MetricScores, Protocol, SampleMedia, StudyConfig, StudyService,
};
use dyadic_metrics::{correlate, MetricTable};
use dyadic_tensor::checkpoint;
use dyadic_tensor::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cli::*;
use crate::experiments::{ablate, all_rows, STANDARD_ROWS};
use crate::pipeline::{fit_normalizers, CorpusData, ToyScale};
use crate::runs::{columns, score_generation, Generation, System, TrainedModel};

/// A problem with the command's inputs rather than with running it.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

fn invalid<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(Invalid(msg.into()).into())
}

/// Whether an error should exit with the validation code.
pub fn is_validation(e: &anyhow::Error) -> bool {
    use dyadic_corpus::CorpusError;
    use dyadic_humaneval::StudyError;
    e.chain().any(|c| {
        c.is::<Invalid>()
            || matches!(
                c.downcast_ref::<CorpusError>(),
                Some(CorpusError::Parse { .. } | CorpusError::Integrity { .. } | CorpusError::Schema(_) | CorpusError::Config(_))
            )
            || matches!(c.downcast_ref::<StudyError>(), Some(StudyError::Config(_) | StudyError::Validation(_)))
    })
}

/// The exact configuration that produced an output directory.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a> {
    pub tool_version: &'static str,
    pub command: &'a Command,
    pub scale: &'a ToyScale,
}

struct Ctx<'a> {
    cli: &'a Cli,
    scale: ToyScale,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.cli.data_root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn write_run_config(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let rc = RunConfig {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: &self.cli.command,
            scale: &self.scale,
        };
        std::fs::write(dir.join("run_config.json"), serde_json::to_string_pretty(&rc)?)?;
        Ok(())
    }

    fn corpus(&self, p: &Path) -> anyhow::Result<CorpusData> {
        CorpusData::load(&self.path(p))
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let scale = match &cli.config {
        Some(p) => read_json(p)?,
        None => ToyScale::default(),
    };
    let ctx = Ctx { cli, scale };
    match &cli.command {
        Command::Corpus(c) => corpus(&ctx, c),
        Command::Train(a) => train(&ctx, a),
        Command::Sample(a) => sample(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Ablate(a) => ablation(&ctx, a),
        Command::Control(ControlCommand::FitThresholds(a)) => thresholds(&ctx, a),
        Command::Adapter(c) => adapter(&ctx, c),
        Command::Study(c) => study(&ctx, c),
    }
}

// ---------------------------------------------------------------- corpus

fn manifest_at(ctx: &Ctx, p: &Path) -> anyhow::Result<CorpusManifest> {
    let p = ctx.path(p);
    let file = if p.is_dir() { p.join("manifest.jsonl") } else { p };
    Ok(load_manifest(&file)?)
}

/// SHA-256 over every file under `dir` except the run configuration,
/// visited in sorted relative-path order.
pub fn checksum(dir: &Path) -> anyhow::Result<String> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if path.file_name().is_some_and(|n| n != "run_config.json") {
                out.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(std::fs::read(dir.join(&f))?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
struct TextRow {
    interaction_id: String,
    side: char,
    fres: f64,
    mtld: Option<f64>,
}

fn corpus(ctx: &Ctx, c: &CorpusCommand) -> anyhow::Result<()> {
    match c {
        CorpusCommand::Validate(a) => {
            let m = manifest_at(ctx, &a.corpus)?;
            m.validate()?;
            let report = validate_splits(&m);
            if let Some(out) = &a.out {
                write_json(&ctx.path(out), &report)?;
            }
            if !report.passed() {
                for v in &report.violations {
                    println!("{v:?}");
                }
                return invalid(format!("{} cross-split participant violations", report.violations.len()));
            }
            println!("ok: {} interactions, splits are participant-disjoint", m.records.len());
            Ok(())
        }
        CorpusCommand::Stats(a) => {
            let stats = compute_stats(&manifest_at(ctx, &a.corpus)?);
            print!("{}", stats.render());
            if let Some(out) = &a.out {
                write_json(&ctx.path(out), &stats)?;
            }
            Ok(())
        }
        CorpusCommand::Synth(a) => {
            let cfg = SyntheticConfig {
                dyads: a.dyads,
                interactions_per_dyad: a.interactions_per_dyad,
                coupling: a.coupling,
                ..SyntheticConfig::default()
            };
            cfg.validate()?;
            let out = ctx.path(&a.out);
            let m = generate_synthetic_corpus(&cfg, a.seed, &out)?;
            ctx.write_run_config(&out)?;
            println!("wrote {} interactions to {}", m.records.len(), out.display());
            println!("checksum {}", checksum(&out)?);
            Ok(())
        }
        CorpusCommand::Textstats(a) => {
            let m = manifest_at(ctx, &a.corpus)?;
            let mut rows = Vec::new();
            for r in &m.records {
                for (side, prompt) in [('a', &r.prompt_a), ('b', &r.prompt_b)] {
                    if prompt.trim().is_empty() {
                        continue;
                    }
                    let tokens = words(prompt);
                    rows.push(TextRow {
                        interaction_id: r.interaction_id.clone(),
                        side,
                        fres: flesch_reading_ease(prompt)?,
                        mtld: mtld(&tokens, 0.72).ok(),
                    });
                }
            }
            if rows.is_empty() {
                return invalid("no prompt text in the manifest");
            }
            let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
            let fres = mean(rows.iter().map(|r| r.fres).collect());
            let lex: Vec<f64> = rows.iter().filter_map(|r| r.mtld).collect();
            println!("{:<12} {:>8}", "prompts", rows.len());
            println!("{:<12} {:>8.2}", "mean FRES", fres);
            println!("{:<12} {:>8.2}  ({} prompts long enough)", "mean MTLD", mean(lex.clone()), lex.len());
            if let Some(out) = &a.out {
                write_json(&ctx.path(out), &rows)?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- models

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Monadic => Mode::Monadic,
        ModeArg::Dyadic => Mode::Dyadic,
        ModeArg::Av => Mode::AvDyadic,
    }
}

fn face_cond(f: FaceCondArg) -> FaceCond {
    match f {
        FaceCondArg::Full => FaceCond::Full,
        FaceCondArg::Headrot => FaceCond::Headrot,
    }
}

fn train(ctx: &Ctx, a: &TrainArgs) -> anyhow::Result<()> {
    let target = match a.target {
        TargetArg::Face => Target::Face,
        TargetArg::Body => Target::Body,
        TargetArg::Joint => Target::Joint,
    };
    let dataset = DatasetConfig {
        face_cond: a.face_cond.map(face_cond),
        body_cond: a.body_cond,
        ..DatasetConfig::new(mode(a.mode), target, ctx.scale.frames)
    };
    if let Err(e) = dataset.validate() {
        return invalid(e.to_string());
    }
    let corpus = ctx.corpus(&a.corpus)?;
    let norms = fit_normalizers(&corpus, &ctx.scale)?;
    let (model, report) = TrainedModel::train(&corpus, dataset, &norms, &ctx.scale, a.seed)?;
    let out = ctx.path(&a.out);
    ctx.write_run_config(&out)?;
    model.save(&out.join("model.ckpt"))?;
    write_json(&out.join("train_report.json"), &report)?;
    println!(
        "{} {:?} model: {} steps, loss {:.4} -> {:.4}, checkpoint {}",
        mode(a.mode).label(),
        target,
        report.losses.len(),
        report.head_mean(50),
        report.tail_mean(50),
        out.join("model.ckpt").display()
    );
    Ok(())
}

fn sample(ctx: &Ctx, a: &SampleArgs) -> anyhow::Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let first = TrainedModel::load(&ctx.path(&a.checkpoint))?;
    let second = a.stage2.as_ref().map(|p| TrainedModel::load(&ctx.path(p))).transpose()?;
    let system = match (a.cascade, &second) {
        (CascadeArg::Joint, None) => System::Single(&first),
        (CascadeArg::Joint, Some(_)) => return invalid("--stage2 needs --cascade face2body or body2face"),
        (_, None) => return invalid("a cascade needs --stage2"),
        (c, Some(s2)) => {
            if s2.card.norms != first.card.norms {
                return invalid("the two stages were trained with different normalisers");
            }
            let spec = match c {
                CascadeArg::Face2body => CascadeSpec::face2body(face_cond(a.face_cond)),
                _ => CascadeSpec::body2face(),
            };
            System::Cascade {
                spec,
                stage1: &first,
                stage2: s2,
            }
        }
    };
    let g = system.generate(&corpus, a.seed)?;
    let out = ctx.path(&a.out);
    ctx.write_run_config(&out)?;
    g.save(&out)?;
    println!(
        "generated {} windows (face: {}, body: {}) into {}",
        g.windows.len(),
        g.face.is_some(),
        g.body.is_some(),
        out.display()
    );
    Ok(())
}

fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> anyhow::Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let mut runs = Vec::with_capacity(a.generations.len());
    for dir in &a.generations {
        let g = Generation::load(&ctx.path(dir))?;
        runs.push(score_generation(&corpus, &g, a.seed)?);
    }
    let mut table = MetricTable::new("Evaluation, mean ± std over runs");
    table.push(&a.system, &a.conditions, &columns(&runs));
    print!("{}", table.render());
    if let Some(out) = &a.out {
        let out = ctx.path(out);
        write_json(&out, &serde_json::json!({ "table": table, "runs": runs }))?;
        if let Some(dir) = out.parent() {
            ctx.write_run_config(dir)?;
        }
    }
    Ok(())
}

fn ablation(ctx: &Ctx, a: &AblateArgs) -> anyhow::Result<()> {
    if a.runs == 0 {
        return invalid("--runs must be at least 1");
    }
    let corpus = ctx.corpus(&a.corpus)?;
    let rows = if a.all { all_rows() } else { STANDARD_ROWS.to_vec() };
    let report = ablate(&corpus, &ctx.scale, &rows, face_cond(a.face_cond), a.runs, a.seed)?;
    let out = ctx.path(&a.out);
    ctx.write_run_config(&out)?;
    let text = report.table.render();
    std::fs::write(out.join("ablation.txt"), &text)?;
    write_json(&out.join("ablation.json"), &report)?;
    print!("{text}");
    Ok(())
}

// ---------------------------------------------------------------- control

fn column_mean(m: &Matrix) -> Vec<f64> {
    (0..m.rows()).map(|r| m.row(r).iter().sum::<f64>() / m.cols().max(1) as f64).collect()
}

fn thresholds(ctx: &Ctx, a: &ThresholdArgs) -> anyhow::Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let mut samples = Vec::new();
    for s in corpus.split(Split::Train) {
        for agent in 0..2 {
            let series = match a.signal {
                SignalArg::HeadDynamism => moving_average(&column_mean(&dynamism(&head_rotation(&s.face[agent])?)), a.smooth)?,
                SignalArg::BodyDynamism => moving_average(&column_mean(&dynamism(&s.body[agent])), a.smooth)?,
                SignalArg::Arousal | SignalArg::Valence => {
                    let Some(av) = &s.av else {
                        return invalid("the corpus has no arousal-valence streams");
                    };
                    av[agent].column(usize::from(a.signal == SignalArg::Valence))
                }
            };
            samples.extend(series);
        }
    }
    let scheme = match a.scheme {
        SchemeArg::Quartile => Scheme::Quartile,
        SchemeArg::Quantile => Scheme::Quantile,
    };
    let spec = fit_thresholds(&samples, a.buckets, scheme).map_err(|e| Invalid(e.to_string()))?;
    let out = ctx.path(&a.out);
    write_json(&out, &spec)?;
    if let Some(dir) = out.parent() {
        ctx.write_run_config(dir)?;
    }
    println!("{:?} over {} frames: {} buckets", a.signal, samples.len(), spec.buckets());
    for (i, t) in spec.thresholds.iter().enumerate() {
        println!("  tau_{} = {t:.6}", i + 1);
    }
    Ok(())
}

// ---------------------------------------------------------------- adapter

const LM_WIDTH: usize = 32;

/// What `adapter train` stores next to the adapter weights.
#[derive(Debug, Serialize, Deserialize)]
struct AdapterCard {
    fixture: FixtureConfig,
    lm_width: usize,
    lm_seed: u64,
    train: AdapterTrainConfig,
    stream: CodeStream,
    adapter: dyadic_adapter::AdapterConfig,
}

fn fixture(segment: f64) -> anyhow::Result<FixtureConfig> {
    if !(segment > 0.0) {
        return invalid("--segment must be positive");
    }
    Ok(FixtureConfig {
        segment_s: segment,
        ..FixtureConfig::default()
    })
}

fn adapter(ctx: &Ctx, c: &AdapterCommand) -> anyhow::Result<()> {
    match c {
        AdapterCommand::Train(a) => {
            let fx = fixture(a.segment)?;
            let lm = FrozenSpeechLm::new(fx.vocab(), LM_WIDTH, a.seed)?;
            let cfg = AdapterTrainConfig {
                epochs: a.epochs,
                rate: a.rate,
                width: a.width,
                seed: a.seed,
                ..AdapterTrainConfig::default()
            };
            let train = pairs_from_fixture(&lm, &gesture_fixture(&fx, a.seed.wrapping_add(1))?, a.rate)?;
            let valid = pairs_from_fixture(&lm, &gesture_fixture(&FixtureConfig { sequences: 10, ..fx.clone() }, a.seed.wrapping_add(2))?, a.rate)?;
            let stream = CodeStream::Gesture { vocab: fx.gestures };
            let model = train_adapter(&train, &valid, stream, &cfg)?;
            let out = ctx.path(&a.out);
            ctx.write_run_config(&out)?;
            let card = AdapterCard {
                fixture: fx,
                lm_width: LM_WIDTH,
                lm_seed: a.seed,
                train: cfg,
                stream,
                adapter: model.adapter.config().clone(),
            };
            checkpoint::save(out.join("adapter.ckpt"), &serde_json::to_value(&card)?, model.adapter.store())?;
            write_json(&out.join("history.json"), &model.history)?;
            if let Some(s) = model.history.last().and_then(|h| h.valid) {
                println!("validation: accuracy {:.3}, macro F1 {:.3}", s.accuracy, s.prf.f1);
            }
            println!("adapter written to {}", out.display());
            Ok(())
        }
        AdapterCommand::Eval(a) => {
            let test_seed = a.seed.wrapping_add(3);
            if let Some(dir) = &a.checkpoint {
                let (cfg, store) = checkpoint::load(ctx.path(dir).join("adapter.ckpt"))?;
                let card: AdapterCard = serde_json::from_value(cfg)?;
                let mut adapter = Adapter::new(card.adapter.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
                checkpoint::restore_into(adapter.store_mut(), &store)?;
                let lm = FrozenSpeechLm::new(card.fixture.vocab(), card.lm_width, card.lm_seed)?;
                let model = dyadic_adapter::TrainedAdapter {
                    adapter,
                    stream: card.stream,
                    rate: card.train.rate,
                    history: Vec::new(),
                };
                let test = pairs_from_fixture(&lm, &gesture_fixture(&FixtureConfig { sequences: 20, ..card.fixture.clone() }, test_seed)?, model.rate)?;
                let s = evaluate_adapter(&model, &test)?;
                println!("{:<6} {:>9} {:>9} {:>9} {:>9}", "rate", "accuracy", "precision", "recall", "F1");
                println!("{:<6} {:>9.3} {:>9.3} {:>9.3} {:>9.3}", model.rate, s.accuracy, s.prf.precision, s.prf.recall, s.prf.f1);
                if let Some(out) = &a.out {
                    write_json(&ctx.path(out), &s)?;
                }
                return Ok(());
            }
            if a.rates.is_empty() {
                return invalid("give --checkpoint or --rates");
            }
            let fx = fixture(a.segment)?;
            let lm = FrozenSpeechLm::new(fx.vocab(), LM_WIDTH, a.seed)?;
            let train = gesture_fixture(&fx, a.seed.wrapping_add(1))?;
            let test = gesture_fixture(&FixtureConfig { sequences: 20, ..fx.clone() }, test_seed)?;
            let cfg = AdapterTrainConfig {
                seed: a.seed,
                ..AdapterTrainConfig::default()
            };
            let rows = rate_sweep(&lm, &fx, &train, &test, &a.rates, &cfg)?;
            println!("{:<6} {:>9} {:>9} {:>9} {:>9}", "rate", "accuracy", "precision", "recall", "F1");
            for r in &rows {
                let s = r.scores;
                println!("{:<6} {:>9.3} {:>9.3} {:>9.3} {:>9.3}", r.rate, s.accuracy, s.prf.precision, s.prf.recall, s.prf.f1);
            }
            if let Some(out) = &a.out {
                write_json(&ctx.path(out), &rows)?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- study

fn study(ctx: &Ctx, c: &StudyCommand) -> anyhow::Result<()> {
    match c {
        StudyCommand::Build(a) => {
            let samples: Vec<SampleMedia> = read_json(&ctx.path(&a.samples))?;
            let protocol = match a.protocol {
                ProtocolArg::Face => Protocol::FaceDyadic,
                ProtocolArg::Body => Protocol::BodyDyadic,
            };
            let items = build_items(&samples, &a.systems, protocol, a.seed)?;
            let mut cfg = StudyConfig::new(&a.study_id, protocol, a.seed);
            cfg.ratings_per_item = a.ratings_per_item;
            let log = ctx.path(&a.log);
            if let Some(dir) = log.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let n = items.len();
            StudyService::create(&log, cfg, items)?;
            println!("study {}: {} items from {} samples and {} systems, log {}", a.study_id, n, samples.len(), a.systems.len(), log.display());
            Ok(())
        }
        StudyCommand::Serve(a) => {
            let mut state = AppState::new(a.media.as_ref().map(|m| ctx.path(m)));
            for log in &a.logs {
                state.add(StudyService::open(ctx.path(log))?);
            }
            let rt = tokio::runtime::Runtime::new()?;
            println!("serving on http://{}", a.addr);
            rt.block_on(serve(a.addr, state))?;
            Ok(())
        }
        StudyCommand::Analyze(a) => {
            let service = StudyService::open(ctx.path(&a.log))?;
            let method = match a.bootstrap {
                Some(resamples) => CiMethod::Bootstrap { resamples, seed: a.seed },
                None => CiMethod::Normal,
            };
            let agg = service.read(|s| aggregate_with(&s.effective_ratings(), s.items(), method))?;
            println!("{:<10} {:<10} {:>4} {:>8} {:>8} {:>6}", "first", "second", "dim", "mean", "ci95", "items");
            for m in &agg.matchups {
                for d in &m.dimensions {
                    let ci = d.ci95.map_or("n/a".to_string(), |c| format!("{c:.3}"));
                    println!("{:<10} {:<10} {:>4} {:>8.3} {:>8} {:>6}", m.first, m.second, d.dimension_id, d.mean, ci, d.n_items);
                }
            }
            if let Some(out) = &a.out {
                write_json(&ctx.path(out), &agg)?;
            }
            Ok(())
        }
        StudyCommand::Correlate(a) => {
            let service = StudyService::open(ctx.path(&a.log))?;
            let scores: MetricScores = read_json(&ctx.path(&a.scores))?;
            let agg = service.results()?;
            let export = export_deltas(&agg, a.dimension, &scores);
            for e in &export.exclusions {
                eprintln!("excluded {}: {}", e.item_id, e.reason);
            }
            let (human, metric) = export.columns();
            let c = correlate(&human, &metric).map_err(|e| Invalid(e.to_string()))?;
            println!("n = {}", c.n);
            for (name, coef) in [("pearson", c.pearson), ("kendall", c.kendall), ("spearman", c.spearman)] {
                println!("{name:<9} {:>7.3}  p = {:.4}", coef.value, coef.p_value);
            }
            if let Some(out) = &a.out {
                let mut report = BTreeMap::new();
                report.insert("correlation", serde_json::to_value(c)?);
                report.insert("export", serde_json::to_value(&export)?);
                write_json(&ctx.path(out), &report)?;
            }
            Ok(())
        }
    }
}
