//! Optimal control of piecewise deterministic Markov processes on a box with forced jumps
//! from the boundary.
//!
//! The crate computes the value function by value iteration on the flow-integrated one-step
//! operator, computes the randomized (dual) value through a penalized sweep on the enlarged
//! state space, simulates the primal and randomized processes, and cross-checks all of them.

// NaN must fail the positivity checks, hence `!(x > 0.0)` throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod model;
pub mod randomized;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod stats;
pub mod verify;

pub use config::{McConfig, Numerics, RunConfig};
pub use error::{Error, Result};
pub use model::{ModelSpec, Point};
