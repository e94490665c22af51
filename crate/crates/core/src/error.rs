use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("point outside the domain: {0}")]
    OutOfDomain(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("target kind mismatch: {0}")]
    TypeMismatch(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unsupported curvature: {0}")]
    UnsupportedCurvature(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("stale input: {0}")]
    StaleInput(String),
    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
