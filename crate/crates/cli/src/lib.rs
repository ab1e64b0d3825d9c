//! Experiment harness around the solver library: sectioned text configs,
//! run manifests, the verification suite, and parameter sweeps.

// same conventions as the core crate: NaN-rejecting guards, lockstep loops
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checks;
pub mod config;
pub mod manifest;
pub mod runner;
pub mod sweep;
