use serde::Serialize;

use super::grid::ValueField;
use super::primal::boundary_operator;
use crate::model::ModelSpec;

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub interior_max: f64,
    pub boundary_max: f64,
    pub interior_argmax: usize,
    pub n_interior: usize,
    pub n_boundary: usize,
}

/// Derivative along `axis` at `node`: central between interior neighbours, first-order
/// one-sided toward the interior when a neighbour is a boundary node.
fn partial(v: &ValueField, node: usize, axis: usize) -> f64 {
    let g = &v.grid;
    let h = g.spacing(axis);
    let here = v.at(node, 0);
    let l = g.neighbour(node, axis, -1);
    let r = g.neighbour(node, axis, 1);
    let usable = |k: Option<usize>| k.filter(|&k| g.is_interior(k));
    match (usable(l), usable(r)) {
        (Some(l), Some(r)) => (v.at(r, 0) - v.at(l, 0)) / (2.0 * h),
        (None, Some(r)) => (v.at(r, 0) - here) / h,
        (Some(l), None) => (here - v.at(l, 0)) / h,
        (None, None) => match (l, r) {
            (Some(l), Some(r)) => (v.at(r, 0) - v.at(l, 0)) / (2.0 * h),
            _ => 0.0,
        },
    }
}

/// Interior: `max_a delta v - h.grad v - f - lambda sum_Q w (v(y) - v(x))`.
/// Boundary: `v - F^v`.
pub fn hjb_residual(spec: &ModelSpec, v: &ValueField, node: usize) -> f64 {
    let g = &v.grid;
    let x = g.node(node);
    let vx = v.at(node, 0);
    if !g.is_interior(node) {
        return vx - boundary_operator(spec, v, &x);
    }
    let mut grad = x;
    for axis in 0..g.dim() {
        grad[axis] = partial(v, node, axis);
    }
    (0..spec.n_interior())
        .map(|a| {
            let jump = spec.q.integrate(spec.q_key(&x, a), |y| v.eval(y) - vx);
            spec.delta * vx - spec.drift_at(&x, a).dot(&grad) - spec.running_cost_at(&x, a) - spec.rate_at(&x, a) * jump
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn residual_report(spec: &ModelSpec, v: &ValueField) -> ResidualReport {
    let g = &v.grid;
    let mut rep = ResidualReport { interior_max: 0.0, boundary_max: 0.0, interior_argmax: 0, n_interior: 0, n_boundary: 0 };
    for k in 0..g.node_count() {
        let r = hjb_residual(spec, v, k).abs();
        if g.is_interior(k) {
            rep.n_interior += 1;
            if r > rep.interior_max {
                rep.interior_max = r;
                rep.interior_argmax = k;
            }
        } else {
            rep.n_boundary += 1;
            rep.boundary_max = rep.boundary_max.max(r);
        }
    }
    rep
}
