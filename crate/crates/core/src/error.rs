use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub position: usize,
    pub expected: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: expected {}", self.position, self.expected)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("division by a number that is not zeroless")]
    DivisionByNeutrix,
    #[error("evaluation outside the domain: {0}")]
    EvalDomain(String),
    #[error("term outside the decidable fragment: {0}")]
    Unnormalizable(String),
    #[error("a zeroless limit is required")]
    ZerolessRequired,
    #[error("hypothesis could not be verified: {0}")]
    HypothesisUnverified(String),
    #[error("contraction |alpha| < 1 (appreciably) is required")]
    ContractionRequired,
    #[error("numeric overflow at step {step}")]
    NumericOverflow { step: usize },
    #[error("the full neutrix R has no finite concretization")]
    FullNotConcretizable,
    #[error("invalid concretization: {0}")]
    InvalidConcretization(String),
    #[error("index {index} is beyond the stored prefix of length {len}")]
    IndexBeyondPrefix { index: usize, len: usize },
    #[error("slow curve is not attractive: {0}")]
    NotAttractive(String),
    #[error("step size {dt} is too large for eps0 = {eps0} (need dt <= eps0/10)")]
    StepUnstable { dt: f64, eps0: f64 },
    #[error("trajectory left the eps-tube at t = {t}")]
    MatchingViolated { t: f64 },
    #[error("internal cross-check failed: {0}")]
    Inconsistent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error {0}")]
    Parse(#[from] ParseError),
}
