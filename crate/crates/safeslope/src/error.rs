use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid resolution must be at least 2 (got {0})")]
    ResolutionTooSmall(usize),
    #[error("grid bounds inverted on axis {axis}: lower {lower} >= upper {upper}")]
    InvertedBounds { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis} out of range for a {dims}-dimensional grid")]
    InvalidAxis { axis: usize, dims: usize },
    #[error("point index {index} out of range for a grid of {len} points")]
    InvalidPointIndex { index: usize, len: usize },
    #[error("grid spacing is not uniform across axes (min {min}, max {max})")]
    NonUniformSpacing { min: f64, max: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel variance must be nonnegative (got {0})")]
    NegativeVariance(f64),
    #[error("kernel lengthscales must be positive (got {0})")]
    NonPositiveLengthscale(f64),
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix factorization failed even with jitter up to {max_jitter:.3e}")]
    IllConditioned { max_jitter: f64 },
    #[error("dataset inputs and outputs differ in length ({inputs} vs {outputs})")]
    DatasetLengthMismatch { inputs: usize, outputs: usize },
    #[error("operation requires a nonempty {0}")]
    Empty(&'static str),
    #[error("noise variance must be nonnegative (got {0})")]
    NegativeNoise(f64),
    #[error("probability parameter must lie in (0, 1) (got {0})")]
    ProbabilityOutOfRange(f64),
    #[error("eigenvalues must be nonnegative and sorted descending")]
    InvalidEigenvalues,
    #[error("convergence time not found within cap {cap}")]
    ConvergenceTimeNotFound { cap: u64 },
    #[error("high-fidelity inputs must be a subset of the low-fidelity inputs")]
    NotNested,
    #[error("low-fidelity noise must be zero for the conditional covariance check (got {0})")]
    NoiseNotZero(f64),
    #[error("duplicate low-fidelity input at positions {0} and {1}")]
    DuplicateInput(usize, usize),
    #[error("quadratic cost is not positive (J = {0}); log-cost undefined")]
    NonPositiveCost(f64),
    #[error("matrix {name} must be {rows}x{cols}")]
    BadShape { name: &'static str, rows: usize, cols: usize },
    #[error("{name} must be positive (semi)definite")]
    NotPsd { name: &'static str },
    #[error("initial safe set is empty")]
    EmptySafeSet,
    #[error("initial safe set contains unsafe point {index} (f = {value} > h = {limit})")]
    UnsafeSeed { index: usize, value: f64, limit: f64 },
    #[error("fewer than {want} safe points exist on the grid (found {found})")]
    NotEnoughSafePoints { want: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
