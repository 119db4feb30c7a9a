use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the spectracube library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid wavelength grid: {0}")]
    InvalidGrid(String),

    #[error("wavelength {requested} nm outside grid range [{start}, {end}] nm")]
    WavelengthOutOfRange { requested: f64, start: f64, end: f64 },

    #[error("denominator white - black below {eps} at {} element(s), first at {:?}", .coords.len(), .coords.first())]
    SmallDenominator { eps: f64, coords: Vec<usize> },

    #[error("degenerate color sample set: {0}")]
    DegenerateColorSamples(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("rank-deficient design matrix (condition number {condition:.3e}); enable ridge to proceed")]
    RankDeficient { condition: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective is not finite at the initial point")]
    NonFiniteObjective,

    #[error("undefined ratio: HbO2 + Hb must be positive")]
    UndefinedSaturation,

    #[error("zero-norm spectrum")]
    ZeroNorm,

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged {
        epoch: usize,
        history: Vec<crate::neural::EpochLoss>,
    },

    #[error("image decode error: {0}")]
    Image(String),

    #[error("CSV error: {0}")]
    Csv(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
