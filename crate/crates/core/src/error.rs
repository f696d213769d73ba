use thiserror::Error;

use crate::protocol::Phase;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid modulus: must be at least 2")]
    InvalidModulus,

    #[error("prime generation failed after {attempts} attempts")]
    GenerationFailure { attempts: u64 },

    #[error("invalid group parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid commitment key: {0}")]
    InvalidKey(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value {value} kWh outside the encodable range (|x|*scale must stay below p/2)")]
    EncodingRange { value: f64 },

    #[error("at least two parties are required, got {0}")]
    InvalidPartyCount(usize),

    #[error("expected {expected} shares, got {got}")]
    IncompleteShares { expected: usize, got: usize },

    #[error("preference parameter chi must be positive")]
    DegeneratePreference,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{requested} targets requested but only {eligible} TAs trade at least {min_kwh} kWh")]
    TooFewTraders { requested: usize, eligible: usize, min_kwh: f64 },

    #[error("lifecycle violation for TA {ta}: {reason}")]
    Lifecycle { ta: usize, reason: String },

    #[error("transport failure in {phase} after {sent} messages")]
    Transport { phase: Phase, sent: u64 },

    #[error("protocol aborted: {0}")]
    ProtocolAbort(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
