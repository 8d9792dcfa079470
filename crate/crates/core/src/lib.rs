//! Time-resolved scattering of a Gaussian wave packet off a rectangular
//! barrier whose height is ramped in time, with detector probabilities and
//! Bohmian trajectory analysis.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohmian;
pub mod config;
pub mod error;
pub mod experiment;
pub mod observables;
pub mod output;
pub mod potentials;
pub mod solver;
pub mod state;
pub mod tridiag;
pub mod units;

pub use error::{Error, Result};
