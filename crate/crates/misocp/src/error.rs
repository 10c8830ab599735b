use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("name collision: `{0}` declared twice")]
    NameCollision(String),
    #[error("assignment does not cover binary `{0}`")]
    IncompleteAssignment(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}
