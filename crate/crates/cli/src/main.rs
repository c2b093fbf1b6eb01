//! `tennis-index`: simulate, segment, locate, refine, index, evaluate and
//! serve tennis match indexes.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "tennis-index", version, about = "Point, game and set indexing of tennis broadcasts")]
#[command(args_override_self = true)]
struct Cli {
    /// JSON file supplying flags, flat or sectioned by subcommand; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic match: frame stack, labels, scorecard text and truth.
    Simulate(SimulateArgs),
    /// Train the rally/non-rally frame classifier.
    Train(TrainArgs),
    /// Classify frames, smooth the margins and extract rally segments.
    Segment(SegmentArgs),
    /// Locate the scorecard in each rally segment.
    Locate(LocateArgs),
    /// Parse recognized scorecard text and correct it against the scoring rules.
    Refine(RefineArgs),
    /// Build a point/game/set index from segments and refined scores.
    Index(IndexArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Serve indexes over HTTP.
    Serve(ServeArgs),
}

const SUBCOMMANDS: [&str; 8] = ["simulate", "train", "segment", "locate", "refine", "index", "evaluate", "serve"];

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Random seed; every output is a pure function of the flags.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of rallies, fault replays included.
    #[arg(long, default_value_t = 8)]
    pub points: usize,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Sets format: best of 3 or 5.
    #[arg(long, default_value_t = 3)]
    pub best_of: u8,
    /// Frame width in pixels.
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    /// Frame height in pixels.
    #[arg(long, default_value_t = 144)]
    pub height: usize,
    /// Probability that a point is preceded by a replayed first serve.
    #[arg(long, default_value_t = 0.05)]
    pub fault_rate: f64,
    /// Fraction of scorecard readings given a single-character recognition error.
    #[arg(long, default_value_t = 0.15)]
    pub corruption: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Frame stack (FSTK).
    #[arg(long)]
    pub frames: PathBuf,
    /// JSON array with one +1/-1 label per frame, or a simulate truth file.
    #[arg(long)]
    pub labels: PathBuf,
    /// Hinge-loss trade-off.
    #[arg(long, default_value_t = 0.05)]
    pub c: f64,
    /// Period of the chi-squared feature map.
    #[arg(long, default_value_t = 3.0)]
    pub period: f64,
    /// Training epochs.
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Shuffling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use every n-th frame for training.
    #[arg(long, default_value_t = 10)]
    pub every: usize,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Frame stack (FSTK).
    #[arg(long)]
    pub frames: PathBuf,
    /// Model written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Kalman process variance.
    #[arg(long, default_value_t = 0.01)]
    pub process_variance: f64,
    /// Kalman measurement variance.
    #[arg(long, default_value_t = 0.25)]
    pub measurement_variance: f64,
    /// Smoothed margin above which a frame counts as rally.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub threshold: f64,
    /// Shortest rally in frames.
    #[arg(long, default_value_t = 30)]
    pub min_len: usize,
    /// Optional per-frame (label, margin, smoothed) dump.
    #[arg(long)]
    pub margins_out: Option<PathBuf>,
    /// Output segment list.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    /// Frame stack (FSTK).
    #[arg(long)]
    pub frames: PathBuf,
    /// Segment list written by `segment`.
    #[arg(long)]
    pub segments: PathBuf,
    /// Quantile of the correlation map used as the binarization threshold.
    #[arg(long, default_value_t = 0.9)]
    pub quantile: f64,
    /// Output box list, one entry (or null) per segment.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Recognized text: two lines per rally, records separated by blank lines.
    #[arg(long)]
    pub scores: PathBuf,
    /// Sets format: best of 3 or 5.
    #[arg(long, default_value_t = 3)]
    pub format: u8,
    /// Window of the games/sets mode filter (odd).
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Do not consider a repeated neighbouring score as a candidate.
    #[arg(long)]
    pub no_repeats: bool,
    /// Output: one score string (or null) per rally.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional correction report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Segment list written by `segment`.
    #[arg(long)]
    pub segments: PathBuf,
    /// Score list written by `refine`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Optional box list written by `locate`.
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    /// Frames per second of the source video.
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    /// Sets format: best of 3 or 5.
    #[arg(long, default_value_t = 3)]
    pub format: u8,
    /// Match identifier.
    #[arg(long)]
    pub match_id: String,
    /// Output index file (conventionally `<id>.index.json`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// Mean fraction of agreeing score fields.
    Ac,
    /// Mean normalized edit distance between recognized texts.
    Edit,
    /// Per-tag precision, recall and accuracy.
    Tags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions: score list, index, or recognized text (edit).
    #[arg(long)]
    pub pred: PathBuf,
    /// Truth: simulate truth file, score list, or recognized text (edit).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum)]
    pub metric: Metric,
    /// Output metrics file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory scanned for `*.index.json`.
    #[arg(long)]
    pub index_dir: PathBuf,
    /// TCP port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Bind address.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Static assets (the navigator UI) served for non-API paths.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn report(&self) -> ExitCode {
        let (kind, detail, code) = match self {
            CliError::Usage(d) => ("usage", d, 1),
            CliError::Data(d) => ("data", d, 2),
        };
        eprintln!("{}", serde_json::json!({"error": kind, "detail": detail}));
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect(), &SUBCOMMANDS) {
        Ok(args) => args,
        Err(e) => return CliError::Usage(e).report(),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.render().to_string();
            let first = detail.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return CliError::Usage(first.to_string()).report();
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Segment(a) => commands::segment(&a),
        Command::Locate(a) => commands::locate(&a),
        Command::Refine(a) => commands::refine(&a),
        Command::Index(a) => commands::index(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Serve(a) => commands::serve(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
