use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no exact jet rule for {0}")]
    UnsupportedNode(String),
    #[error("jet order {requested} exceeds the supported maximum {max}")]
    JetOrderTooLarge { requested: usize, max: usize },
    #[error("quadrature did not reach tolerance: estimate {value:e}, error {error:e} after {panels} panels")]
    QuadratureFailure { value: f64, error: f64, panels: usize },
    #[error("underflow risk: {0}")]
    UnderflowRisk(String),
    #[error("empty combination")]
    EmptyCombination,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("pair index requested on the diagonal ({0}, {0})")]
    DiagonalIndex(usize),
    #[error("correction budget exceeded at index {index}: |delta+K|^2 = {lhs:e} > c^2 = {rhs:e}; rescale the kernel so that every c_k^2 <= 1")]
    BudgetExceeded { index: usize, lhs: f64, rhs: f64 },
    #[error("majorant square is negative ({0:e}); profile and truncation are inconsistent")]
    NegativeSquare(f64),
    #[error("truncation mismatch: expected {expected} coordinates, found {found}")]
    TruncationMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for truncation {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("H-component has nonzero jet entry {order}: {value:e}")]
    NonzeroJet { order: usize, value: f64 },
    #[error("degenerate Gram matrix: eigenvalue {value:e} below threshold {threshold:e}")]
    DegenerateGram { value: f64, threshold: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("neutral vectors are linearly dependent (rank {rank} < {count})")]
    DependentNeutralSet { rank: usize, count: usize },
    #[error("decomposition system is singular")]
    SingularDecomposition,
    #[error("sample family is empty")]
    EmptyFamily,
    #[error("no majorant Gram matrix supplied")]
    MissingMajorant,
    #[error("support straddles the origin: [{0}, {1}]")]
    SupportStraddlesOrigin(f64, f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
