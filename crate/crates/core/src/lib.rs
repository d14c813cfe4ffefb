//! Pseudo H-type groups, their ultra-hyperbolic operators and numerical
//! checks of explicit fundamental solutions.

pub mod cli_runner;
pub mod clifford_catalog;
pub mod error;
pub mod group_core;
pub mod kernel_eval;
pub mod nonexistence_witness;
pub mod oscgauss;
pub mod pairing;
pub mod poly;
pub mod quad;
pub mod schwartz_testfn;
pub mod specfun;

pub use error::{Error, Result};
