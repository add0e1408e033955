use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("no root of the cubic in the admissible interval: {0}")]
    NoRoot(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no closed form for this geometry: {0}")]
    NotImplemented(String),
    #[error("invalid quadrature orders: {0}")]
    InvalidOrders(String),
    #[error("loss of orthogonality at degree {degree}: Gram residual {residual:e}")]
    LossOfOrthogonality { degree: usize, residual: f64 },
    #[error("root iteration did not converge after {0} sweeps")]
    NonConvergence(usize),
    #[error("finite-difference residual is not monotone in the step size")]
    StepTooSmall,
    #[error("boundary curve is not simple: {0}")]
    SelfIntersection(String),
    #[error("degenerate conformal map: {0}")]
    DegenerateMap(String),
    #[error("trajectory step underflow near {0}")]
    StiffRegion(String),
    #[error("no orientation makes all density weights nonnegative (worst {0:e})")]
    SignFlip(f64),
    #[error("iteration cap {0} reached before convergence")]
    IterationCap(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
