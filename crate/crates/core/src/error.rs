use thiserror::Error;

/// Errors produced by the simulator and its optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("coincident nodes: link `{0}` has zero length")]
    CoincidentNodes(&'static str),

    #[error("zero channel: beamforming direction undefined")]
    ZeroChannel,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("power bisection failed: {0}")]
    Bisection(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
