use thiserror::Error;

/// Errors surfaced by the estimation and simulation routines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice shape: {0}")]
    InvalidShape(String),

    #[error("site {site:?} lies outside the {dims:?} lattice")]
    SiteOutOfRange { site: Vec<i64>, dims: Vec<usize> },

    #[error("unsupported lattice: {0}")]
    UnsupportedLattice(String),

    #[error("train/validate split with fraction {fraction} leaves an empty part")]
    DegenerateSplit { fraction: f64 },

    #[error("dependence parameter {eta} outside the admissible interval ({lo}, {hi})")]
    EtaOutOfRange { eta: f64, lo: f64, hi: f64 },

    #[error("adjacency spectrum violates the bipartite assumption: h0={h0}, hm={hm}")]
    BipartiteViolation { h0: f64, hm: f64 },

    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid correlation {rho}; |rho| must be < 1")]
    InvalidCorrelation { rho: f64 },

    #[error("mother wavelet index {k} outside 1..={max}")]
    InvalidMotherIndex { k: usize, max: usize },

    #[error("unsupported dilation matrix: {0}")]
    UnsupportedDilation(String),

    #[error("unknown wavelet family: {0}")]
    UnknownWavelet(String),

    #[error("invalid level pair: j0={j0} exceeds j1={j1}")]
    InvalidLevels { j0: i32, j1: i32 },

    #[error("sample contains no points")]
    EmptySample,

    #[error("validation sample contains no points")]
    EmptyValidation,

    #[error("theory hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("rate exponent alpha={alpha} >= 1/2 makes the threshold constant degenerate")]
    DegenerateRate { alpha: f64 },

    #[error("positive-part mass {mass} too small to normalize")]
    DegenerateEstimate { mass: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
