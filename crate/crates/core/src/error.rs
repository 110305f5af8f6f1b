use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("real part of complex symmetric matrix is not positive definite")]
    RealPartNotSpd,

    #[error("matrix determinant {det:e} is not positive")]
    NotGlPlus { det: f64 },

    #[error("matrix is not symmetric (max asymmetry {asym:e})")]
    NotSymmetric { asym: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("grid has {found} points, at least {min} required")]
    GridTooCoarse { found: usize, min: usize },

    #[error("integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("perturbed label leaves the positive-definite cone")]
    ConeExit,

    #[error("ill-conditioned input: {0}")]
    IllConditioned(String),

    #[error("unsupported hamiltonian: {0}")]
    UnsupportedHamiltonian(String),

    #[error("quadrature budget exceeded: {needed} kernel evaluations > cap {cap}")]
    BudgetExceeded { needed: u128, cap: u128 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
