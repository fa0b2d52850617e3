use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("point lies outside the open unit ball (norm {norm})")]
    PointOutsideBall { norm: f64 },

    #[error("operators do not commute (relative commutator {residual:e})")]
    NotCommuting { residual: f64 },

    #[error("tuple is not a row contraction (row norm {row_norm})")]
    NotRowContraction { row_norm: f64 },

    #[error("tuple is not pure at cut {n_cut}: residual {residual:e}")]
    NotPure { residual: f64, n_cut: usize },

    #[error("dilation is not minimal (coefficient rank {rank}, fiber dimension {fiber_dim})")]
    NotMinimal { rank: usize, fiber_dim: usize },

    #[error("map is not a dilation (isometry defect {isometry:e}, intertwining residual {intertwining:e})")]
    NotADilation { isometry: f64, intertwining: f64 },

    #[error("subspace is not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },

    #[error("malformed representation: {0}")]
    MalformedRepresentation(String),

    #[error("representations have different ranges (gap {gap:e})")]
    RangeMismatch { gap: f64 },

    #[error("polynomial is zero")]
    ZeroPolynomial,

    #[error("polynomial is not quasi-homogeneous")]
    NotQuasiHomogeneous,

    #[error("polynomial is not homogeneous of positive degree")]
    NotHomogeneous,

    #[error("multiplier is not a partial isometry (residual {residual:e})")]
    NotPartialIsometry { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
