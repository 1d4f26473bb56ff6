use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dataset needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("constraint on ({0}, {0}) relates a sample to itself")]
    InvalidConstraint(usize),
    #[error("derivative requested for degenerate pair ({0}, {0})")]
    InvalidPair(usize),
    #[error("sample index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("certain sets already initialized")]
    AlreadyInitialized,
    #[error("sample {0} is already certain")]
    AlreadyCertain(usize),
    #[error("sample {0} is not certain")]
    NotCertain(usize),
    #[error("no certain sets exist")]
    NoCertainSets,
    #[error("every sample is already certain")]
    AllSamplesCertain,
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("oracle needs ground-truth labels")]
    NoGroundTruth,
    #[error("pair ({0}, {1}) is not in the answer log")]
    NotLogged(usize, usize),
    #[error("session is not running")]
    NotRunning,
    #[error("answer for ({0}, {1}) does not match the pending query")]
    StaleAnswer(usize, usize),
}
