use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the identification routines.
///
/// Per-bin numerical failures are not errors: they are recorded as
/// [`BinDefect`](crate::estimators::BinDefect)s on the estimate.
#[derive(Debug, Error)]
pub enum FrfError {
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("empty signal")]
    Empty,
    #[error("spectrum is not conjugate symmetric (bin {bin})")]
    NotConjugateSymmetric { bin: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("excited bin {bin} outside [1, {max}]")]
    BinOutOfRange { bin: usize, max: usize },
    #[error("window length {window} exceeds signal length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("model must be {expected}")]
    WrongTimeDomain { expected: &'static str },
    #[error("matrix exponential did not produce a finite result")]
    ExpmFailed,
    #[error("closed loop is unstable (spectral radius {spectral_radius})")]
    UnstableLoop { spectral_radius: f64 },
    #[error("algebraic loop is ill-posed: I + Dk*D is singular")]
    IllPosedLoop,
    #[error("controller loop {index} is not proper: {reason}")]
    ImproperController { index: usize, reason: String },
    #[error("LPM configuration not solvable: need 2*n_w+1 >= {required}, have {available}")]
    LpmUnsolvable { required: usize, available: usize },
    #[error("too few bins ({n_bins}) for a local window of width {width}")]
    TooFewBins { n_bins: usize, width: usize },
    #[error("{0}")]
    Config(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = FrfError> = std::result::Result<T, E>;

impl FrfError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FrfError::Io { path: path.into(), source }
    }
}
