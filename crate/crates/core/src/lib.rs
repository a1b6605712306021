//! Multi-objective Bayesian optimization over discrete mixture formulation grids.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece of the
//! optimization loop: the formulation grid, a Gaussian process surrogate, Pareto
//! quality indicators, acquisition strategies, k-center coverage selection,
//! synthetic oracles and the campaign state machine. Persistence, file formats,
//! the command line and the HTTP facade live in the `mixbo` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod acquisition;
pub mod bench;
pub mod campaign;
mod error;
pub mod gp;
pub mod kcenter;
mod linalg;
pub mod oracles;
pub mod pareto;
pub mod rng;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
