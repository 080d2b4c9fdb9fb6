use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside the domain of the operation.
    #[error("{param} = {value} is out of domain: {reason}")]
    Domain {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("matrix is not a valid covariance matrix: {0}")]
    Unphysical(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Paired symplectic eigenvalues disagree beyond the pairing tolerance.
    #[error("symplectic eigenvalue pair ({0}, {1}) does not match")]
    Pairing(f64, f64),

    #[error("measured block is numerically singular (condition number {0:e})")]
    SingularBlock(f64),

    #[error("negative radicand {value:e} in closed form for {channel}")]
    NegativeRadicand { channel: String, value: f64 },

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    /// The coarse sign scan ahead of a threshold bisection found more than
    /// one sign change.
    #[error("lower bound is not monotone in omega over the bracket ({sign_changes} sign changes)")]
    NonMonotoneScan { sign_changes: usize },
}

impl Error {
    pub(crate) fn domain(param: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            param,
            value,
            reason,
        }
    }
}
