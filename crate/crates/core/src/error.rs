use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid knot model: {0}")]
    Model(String),

    #[error("query {x} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("invalid prior: {0}")]
    Prior(String),

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error("expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("proposal covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid beam specification: {0}")]
    Beam(String),

    #[error("singular beam system: rigid-body {0} is unconstrained")]
    Unconstrained(&'static str),

    #[error("{0}")]
    Diagnostics(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
