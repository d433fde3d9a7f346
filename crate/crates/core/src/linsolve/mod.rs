//! Sparse linear algebra: compressed-row matrices, direct LU, GMRES and Newton.

mod csr;
mod direct;
mod gmres;
mod newton;

pub use csr::{dot, norm2, CsrMatrix, Pattern, SparseSystem};
pub use direct::{solve_direct, LuFactor, LuSymbolic};
pub use gmres::{
    gmres, solve_gmres, GmresOptions, GmresOutcome, IdentityPreconditioner, Ilu0, Preconditioner,
    PreconditionerKind,
};
pub use newton::{
    finite_difference_probe, newton, newton_solve, NewtonOptions, NewtonOutcome, NewtonProblem,
};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("direct solve inaccurate: relative residual {residual:.3e}")]
    Inaccurate { residual: f64 },
    #[error("iterative solve stopped after {iterations} iterations at relative residual {residual:.3e}")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("Newton diverged, residual history {trace:?}")]
    Diverged { trace: Vec<f64> },
    #[error("Newton did not converge, residual history {trace:?}")]
    NewtonMaxIterations { trace: Vec<f64> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("linear algebra backend failure: {0}")]
    Backend(String),
}
