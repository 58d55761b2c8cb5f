use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian within tolerance: {0}")]
    NotHermitian(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("problem dimension {n} exceeds the solver cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("all {0} randomization samples were infeasible")]
    AllSamplesInfeasible(usize),
}
