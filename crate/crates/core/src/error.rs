use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid boundary point")]
    InvalidBoundaryPoint,
    #[error("negative radius: {0}")]
    NegativeRadius(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature failed (error estimate {estimate:.3e})")]
    QuadratureFailed { estimate: f64 },
    #[error("not stochastically ordered (gap {gap:.3e} at r = {at})")]
    NotStochasticallyOrdered { at: f64, gap: f64 },
    #[error("limit not resolved: y = {y:.3e} at the horizon cap")]
    LimitNotResolved { y: f64 },
    #[error("hitting horizon exceeded at t = {horizon}")]
    HittingHorizonExceeded { horizon: f64 },
    #[error("insufficient horizon: need t = {required}, cap is {cap}")]
    InsufficientHorizon { required: f64, cap: f64 },
    #[error("tau array construction stopped at k = {k}: {source}")]
    TauArray { k: usize, source: Box<Error> },
    #[error("coinciding boundary points")]
    CoincidingBoundaryPoints,
    #[error("grid mismatch")]
    GridMismatch,
    #[error("parameter constraint violated: {0}")]
    ParameterConstraint(String),
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("zero eigenvalue of resolvent")]
    ZeroEigenvalue,
    #[error("eigenvalue too close to zero: {0:e}")]
    TinyEigenvalue(f64),
    #[error("phase accounting failure")]
    PhaseAccounting,
}
