use thiserror::Error;

/// Errors raised by the information-bottleneck toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IbError {
    #[error("unknown block `{0}`")]
    UnknownBlock(String),

    #[error("conditioning block covariance is singular (min eigenvalue {0:e})")]
    SingularConditioningBlock(f64),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("zero probability: {0}")]
    ZeroProbability(String),

    #[error("eigenproblem returned a complex eigenvalue (imaginary part {0:e})")]
    ComplexEigenvalue(f64),

    #[error("column {0} is constant")]
    ConstantColumn(usize),

    #[error("non-finite input at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },

    #[error("Monte-Carlo KL requires two distributions of the same kind and shape")]
    UnsupportedPair,

    #[error("invalid dag: {0}")]
    InvalidDag(String),

    #[error("invalid structural equation model: {0}")]
    InvalidSem(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl IbError {
    /// True for failures of the numerics rather than of the input shape.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            IbError::SingularConditioningBlock(_)
                | IbError::DegenerateCovariance(_)
                | IbError::ZeroProbability(_)
                | IbError::ComplexEigenvalue(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, IbError>;
