use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {x} lies outside the domain {domain}")]
    Domain { x: String, domain: String },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    /// Some cell-endpoint image of the shifted family is an integer.
    #[error("delta {0} is a bad parameter: a cell-endpoint image is an integer")]
    BadParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("composition has slope {0}, which is not a contraction")]
    NotAContraction(String),

    #[error("branch {0} has slope 0, so preimages are not isolated points")]
    DegenerateSlope(usize),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    /// The parameters sit on one of the excluded coincidence sets.
    #[error("non-generic parameter: {0}")]
    NonGeneric(String),

    #[error("theorem violation: {0}")]
    TheoremViolation(String),

    #[error("certificate rejected: {0}")]
    CertificateRejected(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
