use thiserror::Error;

use crate::optimize::OptimizeTrace;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_d}x{expected_m}, found {found_d}x{found_m}")]
    DimensionMismatch {
        expected_d: usize,
        expected_m: usize,
        found_d: usize,
        found_m: usize,
    },

    #[error("invalid path space: {0}")]
    InvalidSpace(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("norm gradient undefined at the zero path")]
    GradientAtZero,

    #[error("non-smooth norm: p = {p} has no Gateaux gradient")]
    NonSmoothNorm { p: f64 },

    #[error("codebook is empty")]
    EmptyCodebook,

    #[error("duplicate atom: candidate coincides with atom {index}")]
    DuplicateAtom { index: usize },

    #[error("sample is empty")]
    EmptySample,

    #[error("every Voronoi cell is empty")]
    AllCellsEmpty,

    #[error("Lloyd iteration requires p = 2 and r >= 2 (got p = {p}, r = {r})")]
    LloydUnsupported { p: f64, r: f64 },

    #[error("optimization diverged after {} recorded iterations", trace.distortions.len())]
    Diverged { trace: Box<OptimizeTrace> },

    #[error("covariance factorization failed even with diagonal jitter {jitter:e}")]
    CovarianceFactorization { jitter: f64 },

    #[error("product codebook size {size} exceeds cap {cap}")]
    CapExceeded { size: usize, cap: usize },

    #[error("no oracle registered for {0}")]
    NoOracle(String),

    #[error("grid too coarse: need at least {min_m} nodes, got {m}")]
    GridTooCoarse { min_m: usize, m: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
