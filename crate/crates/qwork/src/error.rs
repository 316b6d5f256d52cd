//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: need at least {min}")]
    InvalidDimension { dim: usize, min: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure in {context}: residual {residual:.3e}")]
    NumericalFailure { context: &'static str, residual: f64 },

    #[error("truncation too small: population {population:.3e} above level {level}")]
    TruncationTooSmall { population: f64, level: usize },

    #[error("time {t} outside schedule domain [0, {total}]")]
    OutOfDomain { t: f64, total: f64 },

    #[error("schedule syntax error at line {line}, column {column}: {message}")]
    ScheduleSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schedule semantic error in segment {segment}: {message}")]
    ScheduleSemantic { segment: usize, message: String },

    #[error("no peaks above threshold (max density {max_density:.3e})")]
    EmptyPeakSet { max_density: f64 },

    #[error("no overlapping peaks between forward and backward sets")]
    NoPeakOverlap,

    #[error("nonpositive ratio {ratio:.3e} at W = {w:.6}")]
    NonpositiveRatio { w: f64, ratio: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unsupported quench: {0}")]
    UnsupportedQuench(String),
}

pub type Result<T> = std::result::Result<T, Error>;
