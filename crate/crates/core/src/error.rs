use thiserror::Error;

use crate::conflp::ConfigSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("job {job} assigned to machine {machine}, which is not in its eligibility set")]
    InvalidAssignment { job: usize, machine: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("instance too large: {what} is {size}, budget is {budget}")]
    InstanceTooLarge {
        what: &'static str,
        size: u128,
        budget: u128,
    },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("column generation did not converge within {rounds} rounds")]
    Convergence { rounds: usize, best: Box<ConfigSolution> },

    #[error("invalid marginals: {0}")]
    InvalidMarginals(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("function pair is not compatible: element {value} has measure {in_f} in f but {in_g} in g")]
    Compatibility { value: String, in_f: String, in_g: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal invariant failure: {0}")]
    Internal(String),
}
