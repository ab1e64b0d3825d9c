//! Pseudo-spectral kernel for incompressible flow with transported density and
//! cylindrical-Wiener forcing on the periodic unit torus.
//!
//! The crate is organised around immutable field values: every operation is a
//! pure function returning new fields, so Monte Carlo fan-out can share grids
//! and inputs freely across threads.

// `!(x > 0.0)` guards reject NaN along with the out-of-range value; the
// indexed loops walk several arrays in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod energy;
pub mod error;
pub mod field;
pub mod fixed_point;
pub mod grid;
pub mod noise;
pub mod presets;
pub mod report;
pub mod rng;
pub mod semigroup;
pub mod spectral;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use grid::TorusGrid;
