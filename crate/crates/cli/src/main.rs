//! `emflow`: motion segmentation of optical flow from the command line.

mod commands;
mod files;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emflow::{DistanceKind, ModelKind};

use commands::FrameFailures;

const ORDER_NOTE: &str = "Settings resolve in this order: command-line flags, then values from --config, \
then the documented defaults. Every run writes a manifest (key = value) that can be passed back \
as --config to repeat it.\n\nExit status: 0 success, 1 numerical failure, 2 I/O or usage error.";

#[derive(Parser, Debug)]
#[command(name = "emflow", version, about = "Segment optical flow into parametric motion layers", after_help = ORDER_NOTE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment .flo files with EM over K parametric motion layers.
    Segment(SegmentArgs),
    /// Segment .flo files by gradient descent on a free logit field.
    TrainToy(TrainArgs),
    /// Add a random global quadratic motion to a .flo file.
    Augment(AugmentArgs),
    /// Generate a piecewise-parametric .flo and its ground truth from a spec file.
    Synth(SynthArgs),
    /// Score predicted label maps against binary ground truth (Jaccard).
    Eval(EvalArgs),
    /// Render a .flo as HSV color, or a label PGM with a palette, to PPM.
    Colorize(ColorizeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Worker threads; 0 uses every core [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// key = value settings file (a previous manifest works)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to write the run manifest [default: next to the outputs]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Number of motion layers [default: 2]
    #[arg(long)]
    pub k: Option<usize>,
    /// Likelihood temperature [default: 0.01]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Parametric model: affine or quadratic [default: quadratic]
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Distance: sql2, l2 or l1 [default: l1]
    #[arg(long)]
    pub dist: Option<DistanceKind>,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Resample the flow to WxH before segmenting [default: no resampling]
    #[arg(long)]
    pub resize: Option<String>,
    /// Output directory [default: .]
    #[arg(long, short = 'o')]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Input .flo files (optional when --config lists inputs)
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Random initializations per frame [default: 10]
    #[arg(long)]
    pub inits: Option<usize>,
    /// EM iteration cap [default: 100]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative log-likelihood change that stops EM [default: 1e-6]
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Initial parameter scale relative to the flow's 90th-percentile magnitude [default: 0.5]
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Input .flo files (optional when --config lists inputs)
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of parameter refits [default: 200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Gradient steps on the logits between refits [default: 10]
    #[arg(long)]
    pub grad_steps: Option<usize>,
    /// Gradient-descent step size [default: 0.05]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Standard deviation of the initial logits [default: 0.01]
    #[arg(long)]
    pub init_sd: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Input .flo file (optional when --config lists it)
    pub input: Option<PathBuf>,
    /// Output .flo [default: <stem>.aug.flo]
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// Output CSV of the added parameters [default: <out stem>.theta.csv]
    #[arg(long)]
    pub theta_out: Option<PathBuf>,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Half-width of the constant terms [default: 2]
    #[arg(long)]
    pub range_const: Option<f64>,
    /// Half-width of the linear terms [default: 0.5]
    #[arg(long)]
    pub range_linear: Option<f64>,
    /// Half-width of the quadratic terms [default: 0.25]
    #[arg(long)]
    pub range_quad: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Spec file (optional when --config lists it)
    pub spec: Option<PathBuf>,
    /// Output .flo [default: <spec stem>.flo]
    #[arg(long)]
    pub flow_out: Option<PathBuf>,
    /// Output foreground mask PGM, 255 outside layer 0 [default: <spec stem>.gt.pgm]
    #[arg(long)]
    pub gt_out: Option<PathBuf>,
    /// Output PGM of raw layer labels [default: not written]
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// Override the spec's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the spec's noise level
    #[arg(long)]
    pub noise: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted label PGMs (`<frame>.labels.pgm` or `<frame>.pgm`)
    pub pred_dir: Option<PathBuf>,
    /// Directory of ground-truth PGMs (`<frame>.pgm`, >127 is foreground), same layout
    pub gt_dir: Option<PathBuf>,
    /// per-sequence or per-frame averaging [default: per-sequence]
    #[arg(long)]
    pub protocol: Option<String>,
    /// Foreground selection: two-mask (smaller layer) or gt-overlap [default: two-mask]
    #[arg(long)]
    pub select: Option<String>,
    /// Output CSV [default: jaccard.csv]
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct ColorizeArgs {
    /// Input .flo, or a label .pgm
    pub input: Option<PathBuf>,
    /// Output PPM [default: <stem>.ppm]
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// Flow magnitude mapped to full saturation [default: 99th percentile]
    #[arg(long)]
    pub max_mag: Option<f64>,
    /// Number of layers for label maps [default: largest label + 1]
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<FrameFailures>() {
        return if f.io { 2 } else { 1 };
    }
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<emflow::Error>())
        .any(emflow::Error::is_numeric);
    if numeric {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(a) => commands::segment::run(a),
        Command::TrainToy(a) => commands::train::run(a),
        Command::Augment(a) => commands::augment::run(a),
        Command::Synth(a) => commands::synth::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Colorize(a) => commands::colorize::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("emflow: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
