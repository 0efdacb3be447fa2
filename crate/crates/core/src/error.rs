use thiserror::Error;

use crate::continuation::Branch;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate state: p(v) + q(v) = {sum} at v = {v}")]
    DegenerateState { v: f64, sum: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value produced; last good time t = {t}")]
    BlowUp { t: f64 },

    #[error("positivity violated at t = {t}: {field} reached {value:e}")]
    Positivity { t: f64, field: &'static str, value: f64 },

    #[error("newton failed to converge after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("continuation step fell below {min_step:e}; {} points kept", .branch.points.len())]
    StuckBranch { min_step: f64, branch: Box<Branch> },

    #[error("bracket contains more than one crossing; refine the continuation step")]
    RefinementNeeded,

    #[error("eigensolver stagnated: {0}")]
    Eigen(String),

    #[error("singular matrix (zero pivot in column {0})")]
    Singular(usize),

    #[error("slope fit: {0}")]
    Fit(String),

    #[error("branch alignment: {0}")]
    Alignment(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::Positivity { .. }
                | Error::NoConvergence { .. }
                | Error::StuckBranch { .. }
                | Error::RefinementNeeded
                | Error::Eigen(_)
                | Error::Singular(_)
                | Error::DegenerateState { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
