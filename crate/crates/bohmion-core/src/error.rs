use thiserror::Error;

/// Errors shared by every module of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("NaN in integrand")]
    NanInIntegrand,

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too coarse: n = {n}, need at least {min}")]
    GridTooCoarse { n: usize, min: usize },

    #[error(
        "bohmion {index} too close to the grid boundary: clearance {clearance:.6e} < required {required:.6e}"
    )]
    BoundaryClearance {
        index: usize,
        clearance: f64,
        required: f64,
    },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("matrix is not Hermitian: residual {residual:.3e}")]
    NotHermitian { residual: f64 },

    #[error("state normalization violated: {0}")]
    Normalization(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("degenerate electronic surfaces on loop: |b| = {value:.3e} at point {index}")]
    DegenerateLoop { index: usize, value: f64 },

    #[error("mixed state where a pure state is required: |n| = {norm:.6}")]
    MixedState { norm: f64 },

    #[error("uncertainty relation violated at cell {index} (margin {margin:.3e})")]
    UncertaintyViolated { index: usize, margin: f64 },

    #[error("empty analysis region: all densities below the floor")]
    EmptyAnalysisRegion,

    #[error(
        "electronic midpoint fixed point did not converge in {max_iter} iterations (last delta {delta:.3e})"
    )]
    FixedPointDiverged { max_iter: usize, delta: f64 },

    #[error("position {x:.6e} outside the tabulated potential range [{lo}, {hi}]")]
    OutOfTable { x: f64, lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
