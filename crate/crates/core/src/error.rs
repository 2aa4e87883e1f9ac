//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be a positive integer, got {0}")]
    InvalidDimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("potential evaluated at the singular point x = 0 with no truncation")]
    SingularPoint,
    #[error("two particles coincide and no truncation radius was given")]
    Collision,
    #[error("entropy undefined: density sample {value} at grid index {index}")]
    EntropyUndefined { index: usize, value: f64 },
    #[error("numerical blow-up detected at t = {t}")]
    BlowUp { t: f64 },
    #[error("bump is under-resolved: need at least {required_n} grid points per axis")]
    UnderResolved { required_n: usize },
    #[error("expansion outside its validity window, t must not exceed {t_max}")]
    ValidityWindow { t_max: f64 },
    #[error("no escape within the validity window")]
    NoEscape,
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("minimizer has nonnegative free energy {0}")]
    NonNegativeFreeEnergy(f64),
    #[error("Monte Carlo estimate failed: {0}")]
    MonteCarlo(String),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
