//! Boosted DC algorithms for `φ = g − h` with strongly convex separable `g`, `h`.
//!
//! The main entry point is [`drivers::run_inmbdca`]; DCA, BDCA and the exact
//! nonmonotone variant are reductions of the same loop. Every iteration is
//! recorded in a [`trace::Trace`] that [`diagnostics::check_trace`] can replay.

// `!(v > 0.0)` is used on purpose so that NaN fails every range check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod drivers;
pub mod error;
pub mod linalg;
pub mod linesearch;
pub mod nu;
pub mod oracles;
pub mod problem;
pub mod problems;
pub mod subproblem;
pub mod trace;

pub use config::{EpsSchedule, InexactMode, LambdaBarRule, SolverConfig, ViolationPolicy};
pub use drivers::{run_bdca, run_dca, run_inmbdca, run_multistart, run_nmbdca, Solver};
pub use error::{DcError, Result};
pub use nu::NuStrategySpec;
pub use oracles::ConvexExpr;
pub use problem::DcProblem;
pub use trace::{IterationRecord, Termination, Trace};
