use thiserror::Error;

/// Failures reported by the estimators and constructions of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("preimage root finder did not converge on branch {branch} (residual {residual:e})")]
    RootNotConverged { branch: usize, residual: f64 },
    #[error("the base point is not fixed by the linear map (displacement {0:e})")]
    NotAFixedPoint(f64),
    #[error("spectral hypotheses violated: {0}")]
    SpectrumViolation(String),
    #[error("eigenvalue moduli are not simple: {0}")]
    NonSimpleSpectrum(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("branch enumeration would produce {requested} items, above the cap {cap}")]
    BranchExplosion { requested: f64, cap: usize },
    #[error("history depths differ ({0} vs {1})")]
    DepthMismatch(usize, usize),
    #[error("cannot shift back {requested} steps in a history of depth {depth}")]
    InsufficientDepth { requested: usize, depth: usize },
    #[error("direction estimate did not settle (residual {residual:e} above {tolerance:e})")]
    DepthTooSmall { residual: f64, tolerance: f64 },
    #[error("Jacobian is singular along the orbit")]
    SingularJacobian,
    #[error("center-unstable and center-stable planes are nearly parallel (sine {0:e})")]
    IllConditionedIntersection(f64),
    #[error("the system has no one-dimensional center direction")]
    NoCenterDirection,
    #[error("the system has no contracting direction")]
    NoStableDirection,
    #[error("candidate budget exceeded ({requested} > {cap})")]
    BudgetExceeded { requested: usize, cap: usize },
    #[error("points {0} and {1} are not separated")]
    NotSeparated(usize, usize),
    #[error("polyline needs more than {0} points")]
    ResamplingOverflow(usize),
    #[error("segment decomposition is inconsistent at index {0}")]
    ConsistencyViolation(usize),
    #[error("no segments in the collection at n = {0}")]
    EmptyCollection(usize),
    #[error("no good segments to glue")]
    NoGoodSegments,
    #[error("no intersection found within {0} steps")]
    NoIntersection(usize),
    #[error("history depth exhausted while splicing")]
    DepthExhausted,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
