use std::path::PathBuf;

use aqa_model::Ablation;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{DatasetPreset, FeatureMode};

/// Acoustic question answering: datasets, training and reports.
///
/// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure,
/// 5 incompatibility. Errors are printed as a single line:
/// `error code=<name> exit=<n> message=<json string>`.
#[derive(Debug, Parser)]
#[command(name = "aqa", version)]
pub struct Cli {
    /// Worker threads for generation and feature extraction (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or ingest elementary-sound banks.
    #[command(subcommand)]
    Bank(BankCommand),
    /// Compose and render scenes.
    #[command(subcommand)]
    Scenes(ScenesCommand),
    /// Generate questions for rendered scenes.
    #[command(subcommand)]
    Questions(QuestionsCommand),
    /// Compute spectrogram features.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// One-shot dataset pipeline.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Aggregate finished runs.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Finite-difference check of every autodiff operator.
    Gradcheck(GradcheckArgs),
    /// Print the parameter count of an experiment's model.
    Params(ParamsArgs),
    /// Write the shipped experiment files.
    #[command(subcommand)]
    Configs(ConfigsCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum BankCommand {
    /// Synthesize a bank.
    Build {
        #[arg(long, value_enum)]
        split: SplitArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a bank from a directory of mono WAV files and a metadata file.
    Ingest {
        #[arg(long)]
        wav: PathBuf,
        /// JSON array of {file, instrument, note, octave} rows.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenesCommand {
    /// Compose and render scenes from a bank.
    Generate {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Split name used in scene ids (default: the bank's split).
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum QuestionsCommand {
    /// Generate questions for every scene in a scene directory.
    Generate {
        #[arg(long)]
        scenes: PathBuf,
        /// Template file (default: the bundled templates).
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        per_scene: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    /// Log-mel spectrograms for every scene in a scene directory.
    Extract {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, value_parser = ["clear2-long-stride", "clear2-short-stride"], default_value = "clear2-long-stride")]
        preset: String,
        #[arg(long, value_enum, default_value = "pad")]
        mode: FeatureMode,
        /// Also fit normalization statistics on these scenes.
        #[arg(long)]
        fit_norm: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Banks, scenes, questions, vocabulary and features for train/val/test.
    Build {
        #[arg(long, value_enum, default_value = "micro")]
        preset: DatasetPreset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "AQA_DATA_DIR")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AblationArg {
    None,
    BlankAudio,
    UnknownQuestions,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::None => Ablation::None,
            AblationArg::BlankAudio => Ablation::BlankAudio,
            AblationArg::UnknownQuestions => Ablation::UnknownQuestions,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment file (see `configs export`).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, env = "AQA_DATA_DIR")]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    pub ablation: AblationArg,
    /// Override the experiment's epoch limit.
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, env = "AQA_DATA_DIR")]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Mean and standard deviation per experiment over seeds.
    Matrix {
        /// Directory searched recursively for `run_record.json` files.
        #[arg(long)]
        runs: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seeds to check (default: the five training seeds).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Experiment file.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ConfigsCommand {
    /// Write one JSON file per shipped experiment.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
}
