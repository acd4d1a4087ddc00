use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tsrev::interpret::LrpRule;
use tsrev::nn::EncoderConfig;
use tsrev::pipelines::{FinetuneMode, PretextHead, PretrainTask};

#[derive(Debug, Parser)]
#[command(name = "tsrev", version, about = "ECG representation learning by temporal/spatial reverse detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Every variant serializes to the `config.json` echo written by the run.
#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic Normal/AF corpus with a manifest.
    Synth(SynthArgs),
    /// Self-supervised pretraining of an encoder.
    Pretrain(PretrainArgs),
    /// Fit a random-projection or PCA baseline.
    Baseline(BaselineArgs),
    /// Train an AF classifier on top of a representation model.
    Finetune(FinetuneArgs),
    /// Train encoder and classifier on labels only.
    Scratch(ScratchArgs),
    /// Score the held-out split and write a metrics report.
    Evaluate(EvaluateArgs),
    /// Pretrain/fine-tune/evaluate over a grid of tasks, dims, sizes and seeds.
    Sweep(SweepArgs),
    /// Relevance heatmaps for selected records.
    Interpret(InterpretArgs),
    /// Nearest-neighbor label study with a Welch t-test.
    Neighbors(NeighborsArgs),
    /// 2-D PCA projection of representations.
    Project2d(Project2dArgs),
    /// Re-run a command from its config.json echo.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// 4 stages x 2 blocks, 16 base channels.
    Reference,
    /// 3 stages x 1 block, 4 base channels, stride-4 stem.
    Desk,
}

impl Arch {
    pub fn config(self, dim: usize) -> EncoderConfig {
        match self {
            Arch::Reference => EncoderConfig::default(),
            Arch::Desk => EncoderConfig::desk(),
        }
        .with_rep_dim(dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Ts,
    Temporal,
    Spatial,
    Simclr,
    Ae,
}

impl From<TaskArg> for PretrainTask {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Ts => PretrainTask::Ts,
            TaskArg::Temporal => PretrainTask::TemporalOnly,
            TaskArg::Spatial => PretrainTask::SpatialOnly,
            TaskArg::Simclr => PretrainTask::SimClr,
            TaskArg::Ae => PretrainTask::Ae,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadArg {
    TwoBit,
    FourWay,
}

impl From<HeadArg> for PretextHead {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::TwoBit => PretextHead::TwoBit,
            HeadArg::FourWay => PretextHead::FourWay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Rp,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Linear,
    Full,
}

impl From<ModeArg> for FinetuneMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Linear => FinetuneMode::LinearProbe,
            ModeArg::Full => FinetuneMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Epsilon,
    Zero,
}

impl RuleArg {
    pub fn rule(self, eps: f64) -> LrpRule {
        match self {
            RuleArg::Epsilon => LrpRule::Epsilon(eps),
            RuleArg::Zero => LrpRule::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    F32,
    Text,
}

/// Which records are held out for evaluation. Every command that reads a
/// labelled corpus derives the same record-level split from these.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    /// Seed for the held-out split; defaults to the model's recorded split or `--seed`.
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Share of records held out for evaluation.
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub normal: usize,
    #[arg(long)]
    pub af: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Record length in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 300)]
    pub fs: u32,
    /// Draw heart rate, morphology, noise and wander per record.
    #[arg(long)]
    pub varied: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::F32)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PretrainArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = HeadArg::TwoBit)]
    pub head: HeadArg,
    #[arg(long, value_enum, default_value_t = Arch::Reference)]
    pub arch: Arch,
    /// SimCLR temperature.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// End reverse-detection training once held-out pretext accuracy reaches this.
    #[arg(long)]
    pub stop_at_accuracy: Option<f64>,
    /// Training-log CSV; defaults to `<out>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    #[arg(long)]
    pub n_train: usize,
    /// Equal numbers of Normal and AF training segments.
    #[arg(long)]
    pub balanced: bool,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Encoder learning rate relative to the head's in full mode.
    #[arg(long, default_value_t = 0.1)]
    pub encoder_lr_scale: f64,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScratchArgs {
    #[arg(long)]
    pub n_train: usize,
    #[arg(long)]
    pub balanced: bool,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = Arch::Reference)]
    pub arch: Arch,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Any of ts, temporal, spatial, simclr, ae, rp, pca, scratch.
    #[arg(long, value_delimiter = ',', default_value = "ts")]
    pub tasks: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub dims: Vec<usize>,
    #[arg(long = "n-train", value_delimiter = ',', default_value = "50,100,200,500,1000,2000")]
    pub n_train: Vec<usize>,
    /// Number of seeds, counted up from `--seed`.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Arch::Reference)]
    pub arch: Arch,
    #[arg(long, default_value_t = 30)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub pretrain_lr: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InterpretArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Record ids; every segment of each record gets a heatmap.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ids: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = RuleArg::Epsilon)]
    pub rule: RuleArg,
    #[arg(long, default_value_t = tsrev::interpret::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Also render SVG plots.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NeighborsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long)]
    pub report: PathBuf,
    /// Cap on held-out segments per class.
    #[arg(long)]
    pub per_class: Option<usize>,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Project2dArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A config.json written by an earlier run.
    pub config: PathBuf,
}
