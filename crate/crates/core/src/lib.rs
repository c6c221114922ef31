//! Steady-state modeling and optimization of steam district heating
//! networks.
//!
//! The crate builds a graph model of a co-located steam/condensate network,
//! turns it into a nonlinear program over pressures, temperatures, flows,
//! pump boosts and load slacks, and solves it with a bundled primal-dual
//! interior point method.

// Index loops mirror the math; negated comparisons also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod io;
pub mod model;
pub mod nlp;
pub mod physics;
pub mod scenario;
pub mod solver;
pub mod units;
