//! Command-line grammar of the `dyadic` binary.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "dyadic", version, about = "Dyadic face and body motion generation at desk scale")]
pub struct Cli {
    /// Directory relative corpus and output paths resolve against.
    #[arg(long, global = true, env = "DYADIC_DATA_ROOT")]
    pub data_root: Option<PathBuf>,
    /// JSON file overriding model and training sizes.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Corpus preparation and inspection.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Train one motion model.
    Train(TrainArgs),
    /// Generate the test split with a model or a cascade.
    Sample(SampleArgs),
    /// Score generation runs against held-out motion.
    Evaluate(EvaluateArgs),
    /// Train, generate and score the face/body ablation systems.
    Ablate(AblateArgs),
    /// Control-signal utilities.
    #[command(subcommand)]
    Control(ControlCommand),
    /// Code-prediction adapter on the synthetic speech fixture.
    #[command(subcommand)]
    Adapter(AdapterCommand),
    /// Pairwise human-preference studies.
    #[command(subcommand)]
    Study(StudyCommand),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum CorpusCommand {
    /// Check manifest integrity and participant-disjoint splits.
    Validate(ManifestArgs),
    /// Hours, interactions, sessions, participants and prompts per split.
    Stats(ManifestArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
    /// Reading ease and lexical diversity of the prompts.
    Textstats(ManifestArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ManifestArgs {
    /// Corpus directory holding `manifest.jsonl`, or the manifest itself.
    #[arg(long, default_value = ".")]
    pub corpus: PathBuf,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub dyads: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub coupling: f64,
    #[arg(long, default_value_t = 4)]
    pub interactions_per_dyad: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Monadic,
    Dyadic,
    Av,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetArg {
    Face,
    Body,
    Joint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceCondArg {
    Full,
    Headrot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeArg {
    Joint,
    Face2body,
    Body2face,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value = ".")]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, value_enum)]
    pub target: TargetArg,
    /// Condition a body model on face channels (second stage of face2body).
    #[arg(long, value_enum)]
    pub face_cond: Option<FaceCondArg>,
    /// Condition a face model on body motion (second stage of body2face).
    #[arg(long)]
    pub body_cond: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, default_value = ".")]
    pub corpus: PathBuf,
    /// Checkpoint of the model, or of stage one of a cascade.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Checkpoint of stage two.
    #[arg(long, requires = "cascade")]
    pub stage2: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "joint")]
    pub cascade: CascadeArg,
    #[arg(long, value_enum, default_value = "full")]
    pub face_cond: FaceCondArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, default_value = ".")]
    pub corpus: PathBuf,
    /// Generation directories, one per run.
    #[arg(long = "gen", required = true)]
    pub generations: Vec<PathBuf>,
    #[arg(long, default_value = "system")]
    pub system: String,
    #[arg(long, default_value = "")]
    pub conditions: String,
    /// Seed of the diversity pairing.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long, default_value = ".")]
    pub corpus: PathBuf,
    /// Generation runs per system.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    /// Every mode crossed with every structure instead of the six standard rows.
    #[arg(long)]
    pub all: bool,
    #[arg(long, value_enum, default_value = "full")]
    pub face_cond: FaceCondArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum ControlCommand {
    /// Fit bucket thresholds for a scalar control channel on the training split.
    FitThresholds(ThresholdArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalArg {
    /// Frame-to-frame change of head rotation, averaged over its channels.
    HeadDynamism,
    /// Frame-to-frame change of body pose, averaged over its channels.
    BodyDynamism,
    Arousal,
    Valence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Quartile,
    Quantile,
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long, default_value = ".")]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub signal: SignalArg,
    #[arg(long, value_enum, default_value = "quantile")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 4)]
    pub buckets: usize,
    /// Moving-average window applied to dynamism before fitting.
    #[arg(long, default_value_t = 5)]
    pub smooth: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum AdapterCommand {
    /// Train a gesture-code adapter on the speech fixture.
    Train(AdapterTrainArgs),
    /// Score a trained adapter, or sweep code rates.
    Eval(AdapterEvalArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct AdapterTrainArgs {
    /// Codes per second.
    #[arg(long, default_value_t = 2.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    /// Length of a constant-label fixture segment in seconds.
    #[arg(long, default_value_t = 0.5)]
    pub segment: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AdapterEvalArgs {
    /// Adapter directory written by `adapter train`.
    #[arg(long, conflicts_with = "rates")]
    pub checkpoint: Option<PathBuf>,
    /// Train and score one adapter per rate instead, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    pub rates: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub segment: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolArg {
    Face,
    Body,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum StudyCommand {
    /// Pair every sample's clips and start an event log.
    Build(StudyBuildArgs),
    /// Serve the rating API for one or more studies.
    Serve(StudyServeArgs),
    /// Match-up means and confidence intervals from an event log.
    Analyze(StudyAnalyzeArgs),
    /// Correlate human preferences with metric differences.
    Correlate(StudyCorrelateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct StudyBuildArgs {
    /// JSON array of samples: `sample_id`, `anchor`, `candidates`, `vad_segments`.
    #[arg(long)]
    pub samples: PathBuf,
    /// Systems to compare, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub systems: Vec<String>,
    #[arg(long, value_enum)]
    pub protocol: ProtocolArg,
    #[arg(long)]
    pub study_id: String,
    #[arg(long, default_value_t = 5)]
    pub ratings_per_item: usize,
    #[arg(long)]
    pub seed: u64,
    /// Event log to create.
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StudyServeArgs {
    #[arg(long = "log", required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory clips are served from.
    #[arg(long)]
    pub media: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StudyAnalyzeArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Bootstrap resamples for the intervals; normal intervals without it.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StudyCorrelateArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// JSON object: system → sample → metric score.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub dimension: u8,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
