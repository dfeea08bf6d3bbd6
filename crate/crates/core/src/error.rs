use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("element is not hermitian (max deviation {deviation:.3e})")]
    ElementNotHermitian { deviation: f64 },

    #[error("{what} index {index} out of range 1..={bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("instance needs {rows} rows, over the configured budget of {budget}")]
    BudgetExceeded { rows: u128, budget: usize },

    #[error("invalid epsilon schedule: {0}")]
    InvalidSchedule(String),

    #[error("subspace is not invariant under the involution")]
    NotInvolutionInvariant,

    #[error("the unit lies in the quotiented subspace")]
    UnitInSubspace,

    #[error("target violates relation {relation} (residual {residual:.3e})")]
    RelationViolated { relation: String, residual: f64 },

    #[error("element {index} is not a positive contraction: {detail}")]
    NotContraction { index: usize, detail: String },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario mismatch: expected ({expected_n},{expected_k}), got ({got_n},{got_k})")]
    ScenarioMismatch {
        expected_n: usize,
        expected_k: usize,
        got_n: usize,
        got_k: usize,
    },

    #[error("correlation is not nonsignalling (max violation {violation:.3e})")]
    Signalling { violation: f64 },

    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
