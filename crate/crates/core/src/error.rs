use thiserror::Error;

/// Everything that can go wrong while building distributions, reducing them
/// or solving the underlying stochastic programs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probabilities sum to {sum}, expected 1 within 1e-12")]
    NonNormalized { sum: f64 },
    #[error("negative probability {value} at scenario {id}")]
    NegativeProbability { id: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, scenario {id} has {found}")]
    DimensionMismatch { id: usize, expected: usize, found: usize },
    #[error("non-finite entry in {what}")]
    NonFiniteEntry { what: String },
    #[error("empty input")]
    EmptyInput,
    #[error("support subset is empty")]
    EmptySubset,
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("duplicate index {0} in support subset")]
    DuplicateIndex(usize),
    #[error("invalid reduced size m={m} for n={n}")]
    InvalidM { m: usize, n: usize },
    #[error("cost matrix is {rows}x{cols}, expected {n}x{n}")]
    MatrixShapeMismatch { rows: usize, cols: usize, n: usize },
    #[error("enumeration budget exceeded: n={n} > {budget}")]
    BudgetExceeded { n: usize, budget: usize },
    #[error("marginals disagree: sum p = {p_sum}, sum q = {q_sum}")]
    InfeasibleMarginals { p_sum: f64, q_sum: f64 },
    #[error("negative regret {value} at ({i},{j}) exceeds clamp tolerance")]
    NegativeRegret { i: usize, j: usize, value: f64 },
    #[error("z*(P) = {0} is not positive; relative error undefined")]
    DegenerateDenominator(f64),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("model infeasible: {0}")]
    Infeasible(String),
    #[error("time limit reached before optimality (gap {gap})")]
    TimeLimit { gap: f64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("value {value} exceeds capacity {capacity} for farm {farm}")]
    CapacityExceeded { farm: String, value: f64, capacity: f64 },
    #[error("invalid draw: {0}")]
    InvalidDrawSpec(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    VerificationFailure(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidM { .. } | Error::InvalidDrawSpec(_) => 1,
            Error::SolverFailure(_)
            | Error::Infeasible(_)
            | Error::TimeLimit { .. }
            | Error::NegativeRegret { .. }
            | Error::DegenerateDenominator(_) => 3,
            Error::VerificationFailure(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
