//! Constrained Anderson acceleration (CAA) and its convergence-rate calculus.
//!
//! The crate is organised bottom-up:
//!
//! - [`polynomials`]: Chebyshev polynomials, their interval rescalings and
//!   max-abs evaluation on intervals.
//! - [`rates`]: closed-form rates, l1 budgets and thresholds, including the
//!   piecewise-linear global bound on the constrained Chebyshev value.
//! - [`lp`] and [`chebsolve`]: a dense simplex solver and the exchange-method
//!   oracle for the constrained Chebyshev problem.
//! - [`lsq`]: the l1-constrained extrapolation-weight subproblem.
//! - [`operators`]: contractive fixed-point maps with known constants.
//! - [`caa`]: one extrapolation step and the guarded outer loop.
//! - [`cli`]: the experiment harness behind the `caa` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caa;
pub mod chebsolve;
pub mod cli;
pub mod error;
pub mod lp;
pub mod lsq;
pub mod operators;
pub mod polynomials;
pub mod rates;

pub use error::{Error, Result};
