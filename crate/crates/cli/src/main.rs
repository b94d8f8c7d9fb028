mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loopcodec::Error;

/// Intra codec with a learned in-loop filter and a neural intra mode.
#[derive(Parser, Debug)]
#[command(name = "loopcodec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a PGM image or raw YUV 4:2:0 video.
    Encode(EncodeArgs),
    /// Decode a bitstream to PGM or raw YUV.
    Decode(DecodeArgs),
    /// Train the per-QP in-loop filter bank.
    TrainFilter(TrainFilterArgs),
    /// Train the fully-connected intra predictor.
    TrainIntra(TrainIntraArgs),
    /// QP sweep of an anchor and a test configuration with BD-rate report.
    Eval(EvalArgs),
    /// BD-rate and BD-PSNR between two RD point CSV files.
    Bdrate(BdrateArgs),
    /// Layer shapes and parameter counts of an architecture.
    Info(InfoArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct RawDims {
    /// Width of raw YUV input.
    #[arg(long)]
    width: Option<usize>,
    /// Height of raw YUV input.
    #[arg(long)]
    height: Option<usize>,
    /// Number of frames to read from raw YUV input (default: all).
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// key=value file with defaults for any of this command's flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Bitstream path.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    qp: Option<u8>,
    /// Enable the in-loop filter.
    #[arg(long)]
    filter: bool,
    /// Enable the neural intra mode.
    #[arg(long)]
    neural: bool,
    /// Model bank directory.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Also write the reconstruction (PGM or YUV by extension).
    #[arg(long)]
    recon: Option<PathBuf>,
    #[arg(long)]
    lambda_scale: Option<f64>,
    #[command(flatten)]
    dims: RawDims,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Reconstruction path (PGM or YUV by extension).
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    bank: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainCommon {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Text file listing PGM training images.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Model bank directory to create or update.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bank id written into bank.cfg (kept from an existing bank otherwise).
    #[arg(long)]
    bank_id: Option<u8>,
    /// Print the loss every this many steps (0 disables).
    #[arg(long)]
    log_every: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainFilterArgs {
    #[command(flatten)]
    common: TrainCommon,
    /// Trained QPs, one band each.
    #[arg(long)]
    qps: Option<String>,
    /// Inception blocks (12 is the full network).
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    pre_maps: Option<usize>,
    #[arg(long)]
    branch_maps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainIntraArgs {
    #[command(flatten)]
    common: TrainCommon,
    /// Context rows/columns around the block.
    #[arg(long)]
    context: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    hidden: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input images or sequences; each becomes a report row.
    #[arg(long, short, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    qps: Option<String>,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    anchor_filter: bool,
    #[arg(long)]
    anchor_neural: bool,
    #[arg(long)]
    test_filter: bool,
    #[arg(long)]
    test_neural: bool,
    #[arg(long)]
    report_csv: Option<PathBuf>,
    #[arg(long)]
    report_md: Option<PathBuf>,
    /// Directory for per-sequence RD point CSVs (usable by `bdrate`).
    #[arg(long)]
    points: Option<PathBuf>,
    #[command(flatten)]
    dims: RawDims,
}

#[derive(Args, Debug)]
pub struct BdrateArgs {
    /// CSV with `rate` and `psnr` columns.
    #[arg(long)]
    anchor: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    /// Architecture tag, e.g. inception12, vrcnn, arcnn, fc8k4h128-128.
    arch: String,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CORRUPT: u8 = 3;
pub const EXIT_MISSING_MODEL: u8 = 4;
pub const EXIT_DIVERGED: u8 = 5;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    /// Classifies a library error; `stream` marks errors raised while parsing
    /// a bitstream, which count as corruption rather than bad input.
    pub fn from_lib(e: Error, stream: bool) -> Self {
        let code = match &e {
            Error::MissingModel { .. } => EXIT_MISSING_MODEL,
            Error::Diverged { .. } => EXIT_DIVERGED,
            Error::CorruptStream(_) | Error::HeaderMismatch(_) | Error::InvalidMode(_) => EXIT_CORRUPT,
            Error::Io(_) => EXIT_INPUT,
            _ if stream => EXIT_CORRUPT,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::from_lib(e, false)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => commands::encode(a),
        Command::Decode(a) => commands::decode(a),
        Command::TrainFilter(a) => commands::train_filter(a),
        Command::TrainIntra(a) => commands::train_intra(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bdrate(a) => commands::bdrate(a),
        Command::Info(a) => commands::info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
