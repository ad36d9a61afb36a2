//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The requested guided mode does not propagate at this frequency
    /// (wavenumber would be imaginary).
    #[error("mode n={mode} is evanescent: k={k} <= cutoff beta={beta} rad/m")]
    EvanescentMode { mode: u32, k: f64, beta: f64 },

    /// A profile's depth vector does not match its spatial grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A wavenumber at or below zero where the reflection prefactor is singular.
    #[error("singular wavenumber: xi={0} rad/m must be > 0")]
    SingularWavenumber(f64),

    /// The spectrum's wavenumber grid cannot be aligned to the target
    /// spatial grid's Fourier bins.
    #[error("spectrum does not cover the target grid's Fourier bins: {0}")]
    CoverageError(String),

    /// Defect support exceeds the detection grid.
    #[error("defect out of range: {0}")]
    OutOfRange(String),

    /// Invalid parameter value.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    /// Noise calibration is undefined for an all-zero signal.
    #[error("zero signal: effective power is 0, noise level undefined")]
    ZeroSignal,

    /// The SNR metric's reference vector is all zeros.
    #[error("zero reference vector in SNR metric")]
    ZeroReference,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Batch normalization needs at least two samples in training mode.
    #[error("degenerate batch: batch size {0} < 2 in training mode")]
    DegenerateBatch(usize),

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    /// A persisted file carries an unknown format tag or version.
    #[error("format mismatch: expected {expected}, found {found}")]
    FormatVersionMismatch { expected: String, found: String },

    #[error("malformed file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable process exit code for the CLI: 2 usage/validation, 3 IO, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Parse(_) | Error::FormatVersionMismatch { .. } => 3,
            Error::Divergence { .. }
            | Error::EvanescentMode { .. }
            | Error::SingularWavenumber(_)
            | Error::ZeroSignal
            | Error::ZeroReference => 4,
            Error::Json(_) => 3,
            _ => 2,
        }
    }
}
