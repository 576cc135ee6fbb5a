use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point lies outside the open unit ball (|x| = {norm})")]
    OutsideBall { norm: f64 },
    #[error("point is within the boundary margin of the unit sphere (|x| = {norm})")]
    NearBoundary { norm: f64 },
    #[error("half-space point needs a positive height, got {height}")]
    NonPositiveHeight { height: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("reflection plane normal is not a unit vector (|a| = {norm})")]
    NonUnitNormal { norm: f64 },
    #[error("reflection is not an isometry of the ball: {0}")]
    NotBallIsometry(String),
    #[error("point coincides with the centre of inversion")]
    InversionPole,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("borderline case lambda = ((N-1)/2)^2 excluded: {0}")]
    Borderline(String),
    #[error("evaluation on the singular set |y| = 0")]
    SingularSet,
    #[error("integration step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("quadrature did not reach tolerance (estimate {estimate}, error {error})")]
    Quadrature { estimate: f64, error: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no solution found: {0}")]
    NotFound(String),
    #[error("cannot project onto the Nehari manifold: {0}")]
    NotProjectable(String),
    #[error("fit is ill-conditioned: {0}")]
    IllConditioned(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotFound(_) => 4,
            Error::StepUnderflow { .. }
            | Error::Quadrature { .. }
            | Error::Numerical(_)
            | Error::IllConditioned(_)
            | Error::NotProjectable(_) => 3,
            _ => 2,
        }
    }
}
