//! Homotopy solver for lp-norm regression `min_x c.x + ||Ax - b||_p^p`,
//! `1 < p < infinity`.
//!
//! The objective's `|s|^p` terms are replaced by a smoothing family that is
//! quadratic below a radius `t`; the solver follows the minimizers while the
//! radius shrinks geometrically, warm-starting each phase from the previous
//! one under a preconditioner that makes the phase loss well conditioned.
//! Three interchangeable inner solvers are provided:
//!
//! - `agd-dense`: accelerated gradient descent with an explicit dense
//!   preconditioner (one matrix inversion per phase, matrix-vector products
//!   per iteration);
//! - `agd-sparse`: the same outer loop with a solve-based preconditioner, so
//!   each iteration performs sparse linear solves instead;
//! - `katyusha`: a mini-batch variance-reduced solver over a sketched
//!   preconditioner built from verified leverage-score row sampling.
//!
//! The [`validation`] module holds independent oracles (damped-Newton
//! reference solver, bisection path oracles, finite differences, eigenvalue
//! sandwich checks) and [`acceptance`] wires them into the certification
//! suite used by the CLI and the integration tests.

pub mod acceptance;
pub mod error;
pub mod homotopy;
pub mod linalg;
pub mod matrix;
pub mod problem;
pub mod smoothing;
pub mod solvers;
pub mod validation;

pub use error::{Error, Result};
pub use homotopy::{
    run, FinalX, HomotopyConfig, HomotopyDriver, HomotopyState, PhaseRecord, SolveReport,
    SolverKind,
};
pub use matrix::Matrix;
pub use problem::LpProblem;
pub use smoothing::SmoothedLoss;
pub use validation::OracleResult;
