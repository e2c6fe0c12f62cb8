use std::fmt;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    /// A candidate was discarded by one of the acceptance filters. Sweeps
    /// count these instead of propagating them.
    #[error("candidate rejected: {0}")]
    Rejected(#[from] Rejection),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// The rejection reason, if this error is a per-candidate rejection.
    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            Error::Rejected(r) => Some(r),
            _ => None,
        }
    }
}

/// Why a candidate critical point was discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rejection {
    /// The reshaped eigenvector is not numerically a Hermitian rank-one matrix.
    NotRankOne { gap: f64 },
    /// The frequency formula produced a value with a significant imaginary part.
    OmegaNotReal { imag: f64 },
    /// The crossing frequency is (numerically) zero, so the delay formulas are singular.
    ZeroFrequency { omega: f64 },
    /// No imaginary-axis crossing exists for this parameter value.
    NoCrossing,
    /// σ_min of the characteristic matrix is above tolerance at the reported delays.
    Residual { residual: f64 },
    /// The vector is zero or contains non-finite entries.
    DegenerateVector,
}

impl Rejection {
    /// Stable machine-readable key, used in reports.
    pub fn key(&self) -> &'static str {
        match self {
            Rejection::NotRankOne { .. } => "not_rank_one",
            Rejection::OmegaNotReal { .. } => "omega_not_real",
            Rejection::ZeroFrequency { .. } => "zero_frequency",
            Rejection::NoCrossing => "no_crossing",
            Rejection::Residual { .. } => "residual",
            Rejection::DegenerateVector => "degenerate_vector",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::NotRankOne { gap } => {
                write!(f, "eigenvector not numerically rank-one (gap {gap:.3e})")
            }
            Rejection::OmegaNotReal { imag } => {
                write!(f, "frequency is not real (imaginary part {imag:.3e})")
            }
            Rejection::ZeroFrequency { omega } => {
                write!(f, "zero-crossing frequency (omega = {omega:.3e})")
            }
            Rejection::NoCrossing => write!(f, "no imaginary-axis crossing"),
            Rejection::Residual { residual } => {
                write!(f, "residual {residual:.3e} above tolerance")
            }
            Rejection::DegenerateVector => write!(f, "zero or non-finite vector"),
        }
    }
}

impl std::error::Error for Rejection {}
