//! Inner solvers and preconditioners: the dense, solve-based and sketched
//! changes of variables, preconditioned AGD, and the mini-batch
//! variance-reduced solver.

mod agd;
mod katyusha;
mod objective;
mod preconditioner;
mod sketch;

pub use agd::agd_minimize;
pub use katyusha::{batch_size, katyusha_minimize, KatyushaOptions, KatyushaStats};
pub use objective::{Objective, PreconditionedObjective};
pub use preconditioner::{Preconditioner, SketchedPre};
pub use sketch::{
    leverage_scores, smoothness_constants, sparsify, sparsify_accepted, verify_sparsifier,
    SparsifyResult, SPARSIFY_MAX_ATTEMPTS, SPARSIFY_OVERSAMPLE,
};
