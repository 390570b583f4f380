use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hyperbolicity violated: {0}")]
    HyperbolicityViolation(String),
    #[error("CFL condition violated: dt*max(sqrt a)/dy = {ratio:.4} > {limit}")]
    CflViolation { ratio: f64, limit: f64 },
    #[error("singular tridiagonal step at time level {level}")]
    SingularStep { level: usize },
    #[error("point x = {x} lies outside the domain (0, k(t) = {k})")]
    OutOfDomain { x: f64, k: f64 },
    #[error("expected homogeneous end values, found ({left}, {right})")]
    NonhomogeneousBoundary { left: f64, right: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {detail}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        detail: String,
    },
    #[error("time condition T > 2d fails: T = {horizon}, 2d = {two_d}")]
    HolmgrenViolation { horizon: f64, two_d: f64 },
    #[error("leader solve requires the additive boundary decomposition")]
    ModeGate,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CflViolation { .. } | Error::HyperbolicityViolation(_) => 3,
            Error::SingularStep { .. } | Error::NoConvergence { .. } | Error::CheckFailed(_) => 4,
            Error::HolmgrenViolation { .. } | Error::ModeGate => 5,
            _ => 2,
        }
    }
}
