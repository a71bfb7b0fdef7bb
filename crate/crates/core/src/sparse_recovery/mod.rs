//! Soft-thresholding, ISTA for a single LASSO problem, and sequential ISTA
//! (SISTA) for a sequence of coupled problems.

mod ista;
mod sista;
mod soft;

pub use ista::{
    ista, ista_converged, lasso_objective, ConvergedOutcome, IstaOutcome, LassoProblem, OBJECTIVE_EPS,
};
pub use sista::{
    sista, sista_converged, sista_iterates, sista_objective, sista_traced, RecoveryResult, SistaParams,
};
pub use soft::{soft_scalar, soft_threshold};
