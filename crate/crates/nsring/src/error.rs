use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid under-resolves {what}: {detail}")]
    UnderResolved { what: &'static str, detail: String },
    #[error("input field does not decay at the outer boundary (|g(rho_max)| = {0:.3e})")]
    NonDecaying(f64),
    #[error("shift {0} is numerically singular for the operator")]
    SingularShift(String),
    #[error("iteration did not converge after {iterations} iterations ({detail})")]
    NonConvergence { iterations: usize, detail: String },
    #[error("contour passes too close to the spectrum (resolvent norm {0:.3e})")]
    ContourTooClose(f64),
    #[error("no unstable eigenvalue: {0}")]
    NotUnstable(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("linear algebra failure: {0}")]
    LinAlg(String),
    #[error("time step violates the advective limit: {0}")]
    Cfl(String),
    #[error("trajectory norm exceeded the overflow guard at tau = {0}")]
    Overflow(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
