use misocp::SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("infeasible DR signal at hour {hour}: {detail}")]
    InfeasibleSignal { hour: usize, detail: String },
    #[error("big-M {given} is below the provably valid value {required}")]
    BigM { given: f64, required: f64 },
    #[error("transmission line {from}-{to} has zero reactance")]
    ZeroReactance { from: usize, to: usize },
    #[error("node {0} is not connected to the feeder root")]
    Disconnected(usize),
    #[error("missing data: {0}")]
    Missing(String),
    #[error("window {window} (hours {start}-{end}) failed with status {status}: {detail}")]
    WindowFailed {
        window: usize,
        start: usize,
        end: usize,
        status: String,
        detail: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}
