use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("truncation index {k} out of range for p = {p} (or degenerate tail)")]
    TruncationOutOfRange { k: usize, p: usize },

    #[error("R_k2 is negative: k = {k} exceeds srank_4(Sigma) = {srank4}")]
    NegativeRk2 { k: usize, srank4: f64 },

    #[error("invalid parameter {name} = {value}: expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("epsilon = {0} must lie in (0, 1)")]
    InvalidEpsilon(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient trials: {trials} < {min}")]
    InsufficientTrials { trials: usize, min: usize },

    #[error("rank-deficient design: smallest singular value {s_min:e} below cutoff {cutoff:e}")]
    RankDeficientDesign { s_min: f64, cutoff: f64 },

    #[error("k* is infinite: no truncation level satisfies the balance inequality")]
    InfiniteKStar,

    #[error("invalid denominator {0}: the radicand must be positive")]
    InvalidDenominator(f64),

    #[error("invalid radicand {0}: the chosen form is non-positive")]
    InvalidRadicand(f64),

    #[error("no crossing for zeta1 = {zeta1}: the fixed-point inequality holds at every radius")]
    NoCrossing { zeta1: f64 },

    #[error("delta = {0} must lie in (0, 1/2)")]
    InvalidDelta(f64),

    #[error("candidate {index} lies outside the localized set H(r, rho)")]
    CandidateOutsideLocalization { index: usize },

    #[error("inner maximization did not converge in trial {trial}")]
    InnerSolverNonconvergence { trial: usize },

    #[error("signal-to-noise ratio {snr} below the required floor {floor}")]
    SnrTooSmall { snr: f64, floor: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("{failed} of {total} trials failed")]
    TooManyFailedTrials { failed: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::InfiniteKStar
            | Error::InvalidDenominator(_)
            | Error::InvalidRadicand(_)
            | Error::NegativeRk2 { .. } => 3,
            _ => 2,
        }
    }
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            expected: "a value in (0, 1)",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            expected: "a finite positive value",
        })
    }
}
