//! Error type shared by every module of the engine.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpeError {
    #[error("operator basis would exceed {limit} operators")]
    BasisTooLarge { limit: usize },
    #[error("graph enumeration exceeded {limit} graphs")]
    TooManyGraphs { limit: usize },
    #[error("singular input: {0}")]
    Singular(String),
    #[error("coincident points {0} and {1}")]
    CoincidentPoints(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("inconsistent momenta: {0}")]
    InconsistentMomentum(String),
    #[error("incompatible trees: {0}")]
    Incompatible(String),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("dimension violation: {0}")]
    DimensionViolation(String),
    #[error("integrand is not IR safe: {0}")]
    NotIrSafe(String),
    #[error("missing input: {0}")]
    Missing(String),
}

impl OpeError {
    /// Stable machine-readable code used in CLI error JSON and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            OpeError::BasisTooLarge { .. } => "BASIS_TOO_LARGE",
            OpeError::TooManyGraphs { .. } => "TOO_MANY_GRAPHS",
            OpeError::Singular(_) => "SINGULAR_INPUT",
            OpeError::CoincidentPoints(..) => "COINCIDENT_POINTS",
            OpeError::InvalidArgument(_) => "INVALID_ARGUMENT",
            OpeError::Parse(_) => "PARSE_ERROR",
            OpeError::UnknownField(_) => "UNKNOWN_FIELD",
            OpeError::InconsistentMomentum(_) => "INCONSISTENT_MOMENTUM",
            OpeError::Incompatible(_) => "INCOMPATIBLE",
            OpeError::Domain(_) => "DOMAIN_VIOLATION",
            OpeError::DimensionViolation(_) => "DIMENSION_VIOLATION",
            OpeError::NotIrSafe(_) => "NOT_IR_SAFE",
            OpeError::Missing(_) => "MISSING_INPUT",
        }
    }
}

pub type Result<T> = std::result::Result<T, OpeError>;
