//! Learned, feasibility-guaranteed solvers for linearly constrained problems.
//!
//! The pipeline eliminates the equality constraints ([`reduction`]), maps the
//! output of a small network living in the infinity-norm unit ball onto the
//! reduced feasible polytope with a gauge map ([`gauge`]), and lifts the
//! result back to the full decision vector. Every output satisfies every
//! constraint whatever the network weights are.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod baselines;
pub mod dcopf;
pub mod error;
pub mod gauge;
pub mod interior;
pub mod linalg;
pub mod lp;
pub mod neural;
pub mod problem;
pub mod reduction;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
