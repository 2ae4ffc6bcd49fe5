//! Multiclass classification from constrained binary classifiers.
//!
//! Binary models (a square-modulus shallow network or an MLP baseline) are
//! trained per task and recombined with one-vs-one voting, one-vs-rest
//! argmax, or routing through a binary class tree.

pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod multiclass;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
