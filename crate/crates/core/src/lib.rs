//! Spontaneous emission of a two-level atom whose centre of mass is spread
//! over heights in a uniform gravitational field.
//!
//! Heights, rates, times and frequencies are dimensionless throughout:
//! `zeta = g z / c^2`, rates in units of the ground-level rate `Gamma0`,
//! times `s = Gamma0 tau`, detunings `nu = (omega - Omega)/Gamma0`, and
//! `r = Omega/Gamma0`. [`model::PhysicalParams`] converts to and from SI.

// `!(a > b)` is used on purpose so that NaN inputs fail validation; the
// Gauss–Kronrod tables keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
