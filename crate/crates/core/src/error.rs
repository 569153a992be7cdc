use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("graph has no edges; gossip dynamics are undefined")]
    NoEdges,

    /// Edge endpoints are 1-based in the message.
    #[error("edge {{{0}, {1}}} is not in the graph")]
    EdgeNotInGraph(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient data: step {requested} requested, trajectory covers {available}")]
    InsufficientData { requested: u64, available: String },

    /// Regular agents (1-based) with no path to any stubborn agent.
    #[error("expected-dynamics system is singular: agents {unreachable:?} cannot reach a stubborn agent")]
    Singular { unreachable: Vec<usize> },

    #[error("iterative solve did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user-supplied input rather than a failure
    /// while running.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::EdgeNotInGraph(..)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub(crate) fn invalid_param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
