use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use visionseg_core::synthgen::SynthConfig;
use visionseg_core::ThresholdParams;

#[derive(Debug, Parser)]
#[command(
    name = "visionseg",
    version,
    about = "Segment piano score pages into systems and package them as a dataset"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment page images into systems and build a review queue.
    Segment(SegmentArgs),
    /// Generate a synthetic page corpus with ground truth.
    Synth(SynthArgs),
    /// Score segmentations against a synthetic corpus.
    Eval(EvalArgs),
    /// Export reviewed systems as a dataset.
    Format(FormatArgs),
    /// Serve the review API for a queue directory.
    Serve(ServeArgs),
    /// Print the network spec expected in weight files.
    Netspec(NetspecArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Threshold,
    Cutnet,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Page image, or a directory of PNG/JPEG pages.
    pub input: PathBuf,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub a_min: f64,
    #[arg(long, default_value_t = 0.83)]
    pub a_max: f64,
    /// Gaussian sigma in pixels [default: page height / 150].
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub min_height: usize,
    #[arg(long, default_value_t = 0.5)]
    pub trim_epsilon: f64,
    /// Fixed binarization threshold in (0, 1) [default: Otsu].
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Threshold)]
    pub method: Method,
    /// VSW1 weight file for the cutnet method.
    #[arg(long, env = "VISIONSEG_WEIGHTS")]
    pub weights: Option<PathBuf>,
    /// Report failing pages and continue.
    #[arg(long)]
    pub keep_going: bool,
}

impl SegmentArgs {
    pub fn params(&self) -> ThresholdParams {
        ThresholdParams {
            a_min: self.a_min,
            a_max: self.a_max,
            sigma: self.sigma,
            min_region_height: self.min_height,
            trim_epsilon: self.trim_epsilon,
            binarize_threshold: self.threshold,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(short, long, default_value = "corpus")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub height: usize,
    #[arg(long, default_value_t = 768)]
    pub width: usize,
    #[arg(long, default_value_t = 2)]
    pub min_systems: usize,
    #[arg(long, default_value_t = 5)]
    pub max_systems: usize,
    #[arg(long, default_value_t = 30)]
    pub min_gap: usize,
    #[arg(long, default_value_t = 90)]
    pub max_gap: usize,
    #[arg(long, default_value_t = 40)]
    pub margin: usize,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            page_height: self.height,
            page_width: self.width,
            min_systems: self.min_systems,
            max_systems: self.max_systems,
            min_gap: self.min_gap,
            max_gap: self.max_gap,
            margin: self.margin,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Segment output directory, or a directory of JSON/PNG predictions.
    #[arg(long)]
    pub pred: PathBuf,
    /// Synthetic corpus directory.
    #[arg(long)]
    pub truth: PathBuf,
    /// Rows a cut may lie from a gap centre and still match it.
    #[arg(long, default_value_t = 8.0)]
    pub tolerance: f64,
    /// Report file [default: stdout].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FormatArgs {
    /// Output directory of `visionseg segment`.
    pub queue: PathBuf,
    /// Piece metadata JSON.
    #[arg(long)]
    pub metadata: PathBuf,
    #[arg(short, long, default_value = "dataset")]
    pub out: PathBuf,
    /// Export every segmented system, ignoring review verdicts.
    #[arg(long)]
    pub no_review: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Output directory of `visionseg segment`.
    pub queue: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of static files for the review UI.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct NetspecArgs {
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}
