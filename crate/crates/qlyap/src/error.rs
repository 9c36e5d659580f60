//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: max deviation {max_dev:.3e} exceeds {tol:.3e}")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error(
        "ambiguous eigenvalue clustering: gap {gap:.3e} lies in ({tol:.3e}, {:.3e}); \
         pass an explicit tolerance",
        10.0 * tol
    )]
    AmbiguousClustering { gap: f64, tol: f64 },

    #[error("ambiguous tangent-space rank: singular value {0:.3e} lies in (1e-10, 1e-8)")]
    AmbiguousRank(f64),

    #[error("operation requires a stationary target state")]
    NonStationaryTarget,

    #[error("state is not pseudo-pure (class {0})")]
    NotPseudoPure(String),

    #[error("point is not stationary: residual {0:.3e}")]
    NotStationaryPoint(f64),

    #[error("point is not critical: tangent gradient {0:.3e}")]
    NotCriticalPoint(f64),

    #[error("states do not commute: max commutator entry {0:.3e}")]
    NonCommutingPair(f64),

    #[error("model must be expressed in the drift eigenbasis (off-diagonal drift entry {0:.3e})")]
    NotDriftEigenbasis(f64),

    #[error("stationary-state count overflows for dimension {0} (supported range n <= 20)")]
    CountOverflow(usize),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("config error: {0}")]
    Config(String),
}
