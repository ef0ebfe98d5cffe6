//! `skelact`: train, run and evaluate the online activity detector.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Online activity detection from skeleton streams.
#[derive(Debug, Parser)]
#[command(name = "skelact", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train location models from a labeled manifest and write a model file.
    Train(TrainArgs),
    /// Label every frame of a sequence file or of a stream on standard input.
    Detect(DetectArgs),
    /// Cross-validate all models and write confusion matrices and metrics.
    Eval(EvalArgs),
    /// Write a synthetic labeled dataset with its manifest.
    Synth(SynthArgs),
    /// Inspect the frame features fed to the models.
    #[command(subcommand)]
    Features(FeaturesCommand),
}

#[derive(Debug, Subcommand)]
enum FeaturesCommand {
    /// Print the feature vector of every frame of a sequence.
    Dump(FeaturesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Options shared by commands that build or read a run configuration.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML key-value file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Only use this location (bathroom, bedroom, kitchen, living_room, office).
    #[arg(long)]
    location: Option<String>,
    /// Seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Longest substructure in frames.
    #[arg(long)]
    max_window: Option<usize>,
    /// Boundary sub-activity distribution: uniform or carried_over.
    #[arg(long)]
    boundary: Option<String>,
    /// Feature blocks, comma separated: skeletal, simple_hog, skeletal_hog.
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Manifest CSV with columns file, activity, location, subject.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Where to write the model file.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Do not add mirrored copies of the training sequences.
    #[arg(long)]
    no_mirror: bool,
    /// Load per-frame images stored next to each sequence.
    #[arg(long)]
    images: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model_file: PathBuf,
    /// Sequence file; omit or pass `-` to read frames from standard input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Which detector to run: hierarchical, naive or one_level.
    #[arg(long, default_value = "hierarchical")]
    model: String,
    /// Location model to use when the file covers several.
    #[arg(long)]
    location: Option<String>,
    /// Override the substructure cap stored in the model.
    #[arg(long)]
    max_window: Option<usize>,
    /// Directory of per-frame images for HOG-enabled models.
    #[arg(long)]
    images_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// new_person (leave one subject out) or have_seen.
    #[arg(long, default_value = "new_person")]
    setting: String,
    /// Directory for confusion matrices and the metrics document.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    images: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    subjects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncate every sequence to this many frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Also render RGB and depth images for every frame.
    #[arg(long)]
    images: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Sequence file; omit or pass `-` for standard input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    images_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Detect(a) => commands::detect(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::Features(FeaturesCommand::Dump(a)) => commands::features(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if commands::is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", commands::describe(&e));
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
