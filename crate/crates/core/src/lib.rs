//! Randomized coordinate primal-dual methods for
//! `min g(x) s.t. Ax = b` with block-separable `g`.
//!
//! - [`operators`]: column-blocked linear operators and block norms;
//! - [`prox`]: the proximal catalog for block functions;
//! - [`solvers`]: the full iteration, the coordinate method and its averaged
//!   form, plus the epoch driver [`solvers::run`];
//! - [`problems`]: seeded instance generators;
//! - [`metrics`]: stopping rules, residuals and run reports;
//! - [`experiments`]: benchmark drivers shared by the CLI and benches.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod problems;
pub mod prox;
pub mod rng;
pub mod solvers;
pub mod svd;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{EpochRecord, RunReport, StoppingRule, Termination};
pub use operators::{BlockNorms, BlockOperator, BlockStructure};
pub use problems::{ProblemInstance, Truth};
pub use prox::{BlockFunction, ProxContext, SeparableFunction};
pub use rng::CounterRng;
pub use solvers::{run, IndexStream, Method, RunConfig, RunOutput, StepSizes};
pub use svd::SvdBackend;
