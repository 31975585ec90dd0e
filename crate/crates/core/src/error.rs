use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vectors live on different grids")]
    GridMismatch,

    #[error("reference vector is not strictly positive (component {index} = {value})")]
    NotStrictlyPositive { index: usize, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("node count {n} too small (need at least {min})")]
    TooFewNodes { n: usize, min: usize },

    #[error("interval ({a}, {b}) not supported for {operator}; expected ({expected_a}, {expected_b})")]
    UnsupportedInterval {
        operator: String,
        a: f64,
        b: f64,
        expected_a: f64,
        expected_b: f64,
    },

    #[error("odd node count {0} rejected for Fourier operators")]
    OddNodeCount(usize),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("no eigenvalue within {tol:e} of {lambda0}")]
    NoEigenvalueNear { lambda0: f64, tol: f64 },

    #[error("eigenvalue cluster at {lambda0} is ambiguous: eigenvalue {straddler} lies just outside tolerance {tol:e}")]
    AmbiguousCluster {
        lambda0: f64,
        straddler: Complex64,
        tol: f64,
    },

    #[error("rank test for defective cluster at {lambda0} is inconclusive")]
    RankTestInconclusive { lambda0: f64 },

    #[error("projection at {lambda0} has imaginary residue {residue:e}")]
    ComplexProjection { lambda0: f64, residue: f64 },

    #[error("semigroup is not mean ergodic: {0}")]
    NonErgodic(String),

    #[error("matrix exponential overflows: ‖tA‖₁ = {norm:e}")]
    ExpmOverflow { norm: f64 },

    #[error("resolvent singular at λ = {lambda}: condition {condition:e}, nearest eigenvalue {nearest}")]
    ResolventSingular {
        lambda: f64,
        condition: f64,
        nearest: Complex64,
    },

    #[error("quadrature overflow on panel [{lo}, {hi}]")]
    QuadratureOverflow { lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
