use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod plugin;

#[derive(Parser, Debug)]
#[command(name = "fgseg", version, about = "Scene-specific foreground segmentation: train, segment, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a scene-specific model from a few labeled frames.
    Train(TrainArgs),
    /// Write thresholded masks for every frame of a sequence.
    Segment(SegmentArgs),
    /// Score masks against ground truth per video, category and overall.
    Evaluate(EvaluateArgs),
    /// Score probability maps over a range of thresholds.
    Sweep(SweepArgs),
    /// Generate a synthetic sequence in dataset layout.
    Synth(SynthArgs),
    /// Report parameter counts and the layer table.
    Info(InfoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Args, Debug, Clone)]
pub struct SynthFlags {
    #[arg(long, default_value_t = 64)]
    pub synth_width: usize,
    #[arg(long, default_value_t = 64)]
    pub synth_height: usize,
    #[arg(long, default_value_t = 100)]
    pub synth_frames: usize,
    #[arg(long, default_value_t = 2)]
    pub synth_objects: usize,
    /// Object speed in pixels per frame.
    #[arg(long, default_value_t = 2.0)]
    pub synth_speed: f64,
    #[arg(long, default_value_t = 10)]
    pub synth_min_size: usize,
    #[arg(long, default_value_t = 16)]
    pub synth_max_size: usize,
    /// Per-pixel background noise amplitude (gray levels).
    #[arg(long, default_value_t = 6.0)]
    pub synth_noise: f64,
    /// Amplitude of the waving background pattern.
    #[arg(long, default_value_t = 0.0)]
    pub synth_drift: f64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Sequence directory (input/, groundtruth/).
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Train on a generated scene instead of --data.
    #[arg(long)]
    pub synthetic: bool,
    #[command(flatten)]
    pub synth: SynthFlags,
    /// Frame numbers to train on, one per line (manual selection).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Number of randomly selected training frames.
    #[arg(long, default_value_t = 50)]
    pub frames: usize,
    /// Defaults to 60 for up to 50 frames, else 50.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_split: f64,
    #[arg(long, default_value_t = 6)]
    pub patience: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub l2: f32,
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    /// Class weighting: balanced or uniform.
    #[arg(long, default_value = "balanced")]
    pub weighting: String,
    /// Encoder weights (FGSN container) to start from.
    #[arg(long)]
    pub weights_in: Option<PathBuf>,
    /// Where to write the best checkpoint; defaults to <out>/model.fgsn.
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
    /// Output directory for the history CSV (and weights by default).
    #[arg(long, default_value = "fgseg-run")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Trained model (FGSN container).
    #[arg(long)]
    pub weights_in: PathBuf,
    /// Directory for bin%06d.pgm masks.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    /// Also write 16-bit probability maps (prob%06d.pgm).
    #[arg(long)]
    pub probabilities: bool,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Dataset root: a sequence, a category of sequences, or categories.
    #[arg(long)]
    pub data: PathBuf,
    /// Mask root mirroring the dataset layout.
    #[arg(long)]
    pub masks: PathBuf,
    /// CSV destination; the table is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Root of prob%06d.pgm maps mirroring the dataset layout.
    #[arg(long)]
    pub probs: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub synth: SynthFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    /// Report on a saved model instead of a fresh one.
    #[arg(long)]
    pub weights_in: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FGSEG_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("FGSEG_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("FGSEG_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run() -> anyhow::Result<()> {
    let args = config::expand(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    init_threads()?;
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Segment(a) => commands::segment(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Info(a) => commands::info(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
