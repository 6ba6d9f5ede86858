use thiserror::Error;

use crate::solver::RunHistory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown flux family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("state {value} at x = {x} leaves the flux validation box [-{m}, {m}]; enlarge flux.state_box_m")]
    OutsideStateBox { x: f64, value: f64, m: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver fault at t = {time}: {reason}")]
    SolverFault {
        time: f64,
        reason: String,
        /// Everything recorded up to and including the last finite state.
        partial: Box<RunHistory>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
