use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error at {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("depth {requested} exceeds model horizon {horizon}")]
    DepthExceeded { requested: usize, horizon: usize },

    #[error("coordinate {0} is continuous and has no finite kernel")]
    ContinuousCoordinate(usize),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("enumeration needs {atoms} atoms, budget is {budget}")]
    BudgetExceeded { atoms: u128, budget: u64 },

    #[error("engine mismatch: {0}")]
    EngineMismatch(String),

    #[error("model is not a Markov pair")]
    NotMarkov,

    #[error("model is not a product pair")]
    NotProduct,

    #[error("certified criteria disagree: {0}")]
    InconsistentCriteria(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
