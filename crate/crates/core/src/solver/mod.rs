//! Grid solvers: value iteration for the primal value, the penalized dual sweep, HJB
//! residuals and the contraction certificate.

mod contraction;
mod dual;
mod grid;
mod primal;
mod residual;

pub use contraction::{contraction_factor, default_starts, two_stage_check, ContractionEstimate, TwoStageReport};
pub use dual::{DualOperator, DualSolution};
pub use grid::{Grid, Space, Stencil, ValueField};
pub use primal::{boundary_operator, PrimalOperator, PrimalSolution};
pub use residual::{hjb_residual, residual_report, ResidualReport};

use crate::config::Numerics;
use crate::error::Result;
use crate::model::ModelSpec;
use crate::sim::Policy;

/// Value iteration at the configured resolution and tolerances.
pub fn solve_primal(spec: &ModelSpec, num: &Numerics) -> Result<PrimalSolution> {
    PrimalOperator::new(spec, num, num.grid_n)?.solve(num.tol, num.max_iter)
}

pub fn bellman_apply(spec: &ModelSpec, num: &Numerics, v: &ValueField) -> Result<ValueField> {
    Ok(PrimalOperator::new(spec, num, v.grid.n)?.apply(v))
}

pub fn extract_policy(spec: &ModelSpec, num: &Numerics, v: &ValueField) -> Result<Policy> {
    Ok(PrimalOperator::new(spec, num, v.grid.n)?.extract_policy(v))
}

pub fn solve_penalized_dual(spec: &ModelSpec, num: &Numerics, n: f64) -> Result<DualSolution> {
    DualOperator::new(spec, num, num.grid_n)?.solve(n, num.tol, num.max_iter)
}
