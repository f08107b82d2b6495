//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by operator construction, channel application and the
/// numerical routines built on top of them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("subsystem `{label}` must have dimension >= 1 (got {dim})")]
    InvalidDimension { label: String, dim: usize },

    #[error("matrix is {rows}x{cols}, expected {expected}x{expected}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("system specs do not match: [{left}] vs [{right}]")]
    SpecMismatch { left: String, right: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("trace is {0} (expected 1 within tolerance)")]
    TraceNotOne(f64),

    #[error("operator is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not pure (second-largest eigenvalue {0:.3e})")]
    NotPure(f64),

    #[error("Kraus operators do not sum to identity (deviation {0:.3e})")]
    KrausIncomplete(f64),

    #[error("channel has no Kraus operators")]
    EmptyKraus,

    #[error("invalid Renyi order alpha = {alpha}: {reason}")]
    InvalidAlpha { alpha: f64, reason: &'static str },

    #[error("invalid Schatten order p = {0} (need p >= 1)")]
    InvalidSchattenOrder(f64),

    #[error("objective is not finite at alpha = {0}")]
    NonFiniteObjective(f64),

    #[error("non-finite sample value at draw index {index}")]
    NonFiniteSample { index: u64 },

    #[error("need at least {need} samples (got {got})")]
    TooFewSamples { need: u64, got: u64 },

    #[error("two evaluation routes disagree by {0:.3e} (limit {1:.3e})")]
    DualRouteMismatch(f64, f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
