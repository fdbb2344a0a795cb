use thiserror::Error;

/// Errors raised by the denoising and unwrapping pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("value {value} at index {index} outside [0, 1)")]
    OutOfRange { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate entry at index {index}: zero magnitude")]
    DegenerateEntry { index: usize },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("root finding failed to bracket: phi(lo={lo}) = {phi_lo}, phi(hi={hi}) = {phi_hi}, target {target}")]
    Bracket {
        lo: f64,
        hi: f64,
        phi_lo: f64,
        phi_hi: f64,
        target: f64,
    },

    #[error("quotient tracker requires d=1 (got d={0})")]
    UnsupportedDimension(usize),

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
