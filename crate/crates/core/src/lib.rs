//! Decentralized second-order optimization over undirected networks.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dqm;
pub mod error;
pub mod harness;
pub mod instances;
pub mod linalg;
pub mod netnewton;
pub mod objective;
pub mod spectral;
pub mod topology;

pub use error::{Error, LocalityViolation, Result};
