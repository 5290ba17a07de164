use thiserror::Error;

/// Errors raised by state construction, circuit handling and the test harnesses.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("not a valid state: {0}")]
    InvalidState(String),
    #[error("not a valid measurement: {0}")]
    InvalidPovm(String),
    #[error("dimension {dim} exceeds the cap of {cap} for {what}")]
    DimensionCap {
        what: &'static str,
        dim: usize,
        cap: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mixed pure and density inputs; lift the pure state to a density matrix first")]
    MixedKinds,
    #[error("test passes with probability zero; post-test state undefined")]
    ZeroProbability,
    #[error("circuit error [{}]: {}", .0.code(), .0)]
    Circuit(#[from] CircuitError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Stable short code used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::LayoutMismatch(_) => "LayoutMismatch",
            Error::InvalidLayout(_) => "InvalidLayout",
            Error::InvalidCut(_) => "InvalidCut",
            Error::InvalidState(_) => "InvalidState",
            Error::InvalidPovm(_) => "InvalidPovm",
            Error::DimensionCap { .. } => "DimensionCap",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::MixedKinds => "MixedKinds",
            Error::ZeroProbability => "ZeroProbability",
            Error::Circuit(e) => e.code(),
            Error::Precondition(_) => "Precondition",
            Error::Serialization(_) => "Serialization",
        }
    }
}

/// Circuit-specific failures; each variant has its own code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unknown gate kind `{0}`")]
    UnknownGateKind(String),
    #[error("raw unitary block is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("register dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("circuit mode `{0}` not allowed here")]
    WrongMode(&'static str),
    #[error("verifier is not isometric (deviation {0:.3e})")]
    NotIsometric(f64),
}

impl CircuitError {
    pub fn code(&self) -> &'static str {
        match self {
            CircuitError::Schema(_) => "Schema",
            CircuitError::UnknownGateKind(_) => "UnknownGateKind",
            CircuitError::NotUnitary(_) => "NotUnitary",
            CircuitError::UnknownRegister(_) => "UnknownRegister",
            CircuitError::DimensionMismatch(_) => "DimensionMismatch",
            CircuitError::WrongMode(_) => "WrongMode",
            CircuitError::NotIsometric(_) => "NotIsometric",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
