use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operand violated an operation's shape contract.
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    #[error("kernel size {0}x{1} not supported (each side must be one of 1, 3, 5, 7, 9)")]
    KernelSize(usize, usize),

    #[error("no weights for node `{0}`")]
    MissingWeights(String),

    #[error("weights for node `{node}` have shape {found:?}, graph expects {expected:?}")]
    WeightShape {
        node: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    Version(u32),

    #[error("file truncated while reading {0}")]
    Truncated(String),

    #[error("architecture mismatch: file holds `{found}`, expected `{expected}`")]
    Architecture { expected: String, found: String },

    #[error("unknown architecture tag `{0}`")]
    UnknownArchitecture(String),

    #[error("short file: expected at least {expected} bytes, found {actual}")]
    ShortFile { expected: u64, actual: u64 },

    #[error("bad image header: {0}")]
    BadHeader(String),

    #[error("unsupported PGM maxval {0} (only 255)")]
    Maxval(u32),

    #[error("invalid intra mode {0}")]
    InvalidMode(u8),

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("model bank {bank_id} does not provide {what}")]
    MissingModel { bank_id: u8, what: &'static str },

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("rate-distortion curve needs at least 4 points, got {0}")]
    TooFewPoints(usize),

    #[error("curves have no overlapping {0} range")]
    NoOverlap(&'static str),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract {
            op,
            detail: detail.into(),
        }
    }
}
