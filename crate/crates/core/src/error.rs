use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("index {index} out of range for {len} qubits")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid Pauli literal character {0:?}")]
    BadPauliChar(char),
    #[error("unknown code {0:?} (expected steane7 or golay23)")]
    UnknownCode(String),
    #[error("malformed code asset: {0}")]
    BadAsset(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("singular fit: monomial {dependent} is collinear with {with:?}")]
    SingularFit { dependent: String, with: Vec<String> },
    #[error("not enough fit points: {points} points for {terms} terms")]
    TooFewPoints { points: usize, terms: usize },
    #[error("empty tally: N_U + N_N must be at least 1")]
    EmptyTally,
    #[error("preparation stalled after {attempts} attempts")]
    PreparationStall { attempts: u64 },
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
