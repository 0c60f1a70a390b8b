//! Branch-and-prune gradient optimization for Lipschitz objectives.
//!
//! The crate has two optimizers built on the same Lipschitz bounds:
//!
//! * [`branch_prune::optimize_global`] keeps every sample, walks along the
//!   negative gradient out of the removable parameter space and raises the
//!   lower-bound scale `rho` when the space is covered. It is an exact global
//!   method for small dimensions.
//! * [`solvers::Solver`] with [`solvers::SolverKind::Bpgrad`] is the
//!   memory-free training variant: step length `(f - rho * min f) / L` along the
//!   normalized gradient, plus momentum. The same interface runs the usual
//!   adaptive baselines (SGD with momentum, Adagrad, Adadelta, RMSProp, Adam).
//!
//! [`models`] and [`testbed`] provide small differentiable problems and
//! benchmark functions; [`harness`] runs experiments and writes traces.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branch_prune;
pub mod error;
pub mod harness;
pub mod lipschitz;
pub mod models;
pub mod solvers;
pub mod testbed;
mod vecops;

pub use branch_prune::{
    next_sample, optimize_global, ray_exit, thm2_sample_bound, BranchPruneConfig, GlobalResult,
    Objective, RhoSchedule, Termination,
};
pub use error::{Error, Result};
pub use harness::trace::{RunTrace, TraceRow};
pub use lipschitz::{
    ball_radius, coverage_fraction, in_rps, lower_envelope, lower_estimator, upper_bound, BoxDomain,
    LipschitzConfig, ParamVector, RpsBall, Sample, SampleHistory,
};
pub use models::{Activation, MlpSpec};
pub use solvers::{ConditionRecord, Solver, SolverConfig, SolverKind, SolverState};
pub use testbed::{BenchmarkFn, Dataset, MiniBatch};
