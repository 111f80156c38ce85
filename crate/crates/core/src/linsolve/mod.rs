//! Dense linear algebra and linear programming.
//!
//! Every constraint-qualification and cone query in the crate reduces to one
//! of two small LPs built here: [`cone_feasibility`] (is a vector a
//! nonnegative combination of generators plus a lineality part?) and
//! [`max_margin_direction`] (is there a direction making all generators
//! uniformly negative?). Both are solved with a dense two-phase simplex using
//! Bland's rule and both return certificates that can be re-checked without
//! trusting the solver.

mod cone;
mod lsq;
mod matrix;
mod simplex;

use thiserror::Error;

pub use cone::{cone_feasibility, max_margin_direction, projection_residual, ConeAnswer, FeasibilityCertificate, MarginResult, Separator, SEPARATOR_TOL};
pub use lsq::{least_squares, nnls};
pub use matrix::{dot, norm2, norm_inf, orthonormalize, rank_nullspace, Matrix};
pub use simplex::{simplex_solve, LpProblem, LpSolution, LpStatus};

/// Default pivot tolerance, relative to the largest entry.
pub const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinsolveError {
    #[error("simplex iteration limit ({0}) exceeded")]
    IterationLimit(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("variable {index} has lower bound {lower} above upper bound {upper}")]
    BadBounds { index: usize, lower: f64, upper: f64 },
    #[error("cone query could not be certified either way (best residual {residual:e})")]
    Unverified { residual: f64 },
}
