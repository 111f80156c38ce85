use sipcq::cq::CqError;
use sipcq::linsolve::LinsolveError;
use sipcq::model::ModelError;
use sipcq::optimality::OptimalityError;
use sipcq::solver::SolverError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SOLVER_LIMIT: i32 = 4;
pub const EXIT_LP_FAILURE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cq(#[from] CqError),
    #[error(transparent)]
    Optimality(#[from] OptimalityError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error("report encoding: {0}")]
    Encoding(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(_) | CliError::Usage(_) | CliError::Output { .. } => EXIT_VALIDATION,
            CliError::Cq(e) => cq_code(e),
            CliError::Optimality(OptimalityError::Cq(e)) => cq_code(e),
            CliError::Optimality(OptimalityError::Linsolve(e)) => lp_code(e),
            CliError::Optimality(_) => EXIT_VALIDATION,
            CliError::Solver(SolverError::NoCandidate) => EXIT_SOLVER_LIMIT,
            CliError::Solver(_) => EXIT_VALIDATION,
            CliError::Encoding(_) => EXIT_LP_FAILURE,
        }
    }
}

fn cq_code(e: &CqError) -> i32 {
    match e {
        CqError::Infeasible { .. } => EXIT_INFEASIBLE,
        CqError::Linsolve(l) => lp_code(l),
        CqError::Model(_) => EXIT_VALIDATION,
    }
}

fn lp_code(e: &LinsolveError) -> i32 {
    match e {
        LinsolveError::Dimension(_) => EXIT_VALIDATION,
        _ => EXIT_LP_FAILURE,
    }
}
