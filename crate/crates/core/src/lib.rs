//! Bi-level convex optimization with the Bi-Sub-Gradient method.
//!
//! The crate minimizes an outer convex function `omega` over the minimizers of an
//! inner composite problem `phi = f + g`. It ships the solver, two baselines,
//! proximal building blocks, quasi-Lipschitz constant calculus, synthetic
//! problem generators and a benchmark harness that checks convergence-rate
//! bounds on recorded traces.

pub mod error;
pub mod problems;
pub mod prox_toolkit;
pub mod quasi_lipschitz;
pub mod instances;
pub mod solvers;
pub mod bench;

pub use error::{Error, Result};
