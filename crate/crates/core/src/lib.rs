//! Generalized conditional gradient method (gCGM) for problems of the form
//!
//! ```text
//! minimize  f(x) + φ(κ_P(x))
//! ```
//!
//! where `f` is a smooth convex loss, `κ_P` is the gauge of the convex hull of a
//! finite atomic set and `φ` is a nondecreasing scalar penalty. Each iteration
//! calls a linear maximization oracle over the atoms, solves a one-dimensional
//! problem for the step length, and takes a convex-combination step. The duality
//! gap is available for free and drives a safe screening rule that removes atoms
//! certified to be absent from every optimal support.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, the experiment
//! harness and the command-line interface live in the `gcgm` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::redundant_guards, clippy::result_large_err)]

extern crate alloc;

pub mod atoms;
pub mod diagnostics;
mod error;
mod ext;
pub mod gauge_lp;
pub mod linalg;
pub mod loss;
pub mod penalty;
pub mod reference;
pub mod screening;
pub mod solver;

pub use atoms::{AtomId, AtomKind, AtomMask, AtomicSet, GaugeDecomposition};
pub use diagnostics::{rate_slope, residuals, ResidualRecord, ResidualSeries};
pub use error::{Error, Result};
pub use ext::Ext;
pub use loss::{DataMatrix, Loss, LossKind};
pub use penalty::{Growth, Penalty, PenaltyKind};
pub use reference::{reference_solve, ReferenceOptions, ReferenceSolution};
pub use screening::{apply_rule, delta, support_of, ScreenReport, SupportCertificate};
pub use solver::{
    gap_primal, Control, Iterate, Problem, RunFailure, RunOutput, ScreeningMode, Solver,
    SolverConfig, SolverState, StepOutcome, StepSchedule, TraceRecord,
};
