//! Filter trees over topological Ramsey spaces, with a decidable model of
//! ultrapower ideal values and exhaustive finite pigeonhole oracles.

pub mod cli;
pub mod filter_trees;
pub mod pigeonhole_kernels;
pub mod spaces;
pub mod star_core;

pub use star_core::{FilterOracle, Germ, PeriodicSet, StarError, Tri};
