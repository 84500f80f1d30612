use thiserror::Error;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("value outside the domain: {0}")]
    Domain(&'static str),
    #[error("invalid array configuration: {0}")]
    Config(&'static str),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("singular geometry: {0}")]
    SingularGeometry(&'static str),
    #[error("Fisher information matrix is singular (condition number {condition:.3e}); gauge is not fixed")]
    SingularFim { condition: f64 },
    #[error("sample covariance rank {rank} is below the requested source count {sources}")]
    Rank { rank: usize, sources: usize },
    #[error("under-determined: {equations} sensing equations for {unknowns} unknowns")]
    UnderDetermined { equations: usize, unknowns: usize },
    #[error("gauge is not fixed: {0}")]
    GaugeDeficient(&'static str),
    #[error("measurement ({0}, {1}) has no AoA variance")]
    MissingVariance(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
