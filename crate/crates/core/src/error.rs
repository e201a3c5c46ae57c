use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("alpha = {alpha} is outside (0, 2 - sqrt 2); the representation and limit results need it inside")]
    AlphaDomain { alpha: f64 },

    #[error("J1 = E[G(Z) Z] = {j1:e} vanishes: G does not have Hermite rank 1")]
    HermiteRank { j1: f64 },

    #[error("mean E[Y] = {mu} is not positive")]
    NonpositiveMean { mu: f64 },

    #[error("circulant embedding failed: eigenvalue {value:e} below -{tolerance:e} * max")]
    Embedding { value: f64, tolerance: f64 },

    #[error("requested size {requested} exceeds the limit {limit}")]
    SizeLimit { requested: usize, limit: usize },

    #[error("partial sums never exceed level {level} within horizon {horizon}")]
    HorizonExhausted { level: f64, horizon: usize },

    #[error("renewal fluctuation is degenerate (sup |mu N(t) - t| = {sup} <= mu = {mu})")]
    DegenerateRenewal { sup: f64, mu: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run interrupted after {completed} of {total} replications (checkpoint kept)")]
    Interrupted { completed: usize, total: usize },

    #[error("checkpoint {path:?} does not belong to this configuration")]
    CheckpointMismatch { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
