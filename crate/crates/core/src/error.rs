use ris_conic::ConicError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    ConfigSyntax(#[from] toml::de::Error),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{step}: {reason}")]
    Infeasible { step: &'static str, reason: String },
    #[error("{step}: solver failure: {source}")]
    Solver {
        step: &'static str,
        #[source]
        source: ConicError,
    },
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("probability {0} is outside (0, 1)")]
    Probability(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn solver(step: &'static str) -> impl FnOnce(ConicError) -> Self {
        move |source| Error::Solver { step, source }
    }

    pub(crate) fn infeasible(step: &'static str, reason: impl Into<String>) -> Self {
        Error::Infeasible { step, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
