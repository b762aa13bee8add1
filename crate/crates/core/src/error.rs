use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("nonzero mass {mass} over zero denominator at t = {location}")]
    NonzeroOverZero { location: f64, mass: f64 },

    #[error("atom mass {mass} at t = {location} is outside [0, 1]")]
    MassOutOfRange { location: f64, mass: f64 },

    #[error("no observation inside the kernel support at the covariate point (bandwidth too small)")]
    EmptyNeighborhood,

    #[error("local-linear design is singular at the covariate point")]
    SingularDesign,

    #[error("rearranged hazard atom {mass} at t = {location} is outside [0, 1]")]
    LemmaViolation { location: f64, mass: f64 },

    #[error("observed time {0} is not positive")]
    NonpositiveTime(f64),

    #[error("every candidate bandwidth produced an undefined cross-validation loss")]
    AllCandidatesInvalid,

    #[error("degenerate domain: [{0}, {1}] is not a proper interval")]
    DegenerateDomain(f64, f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
