use rayon::prelude::*;
use serde::Serialize;

use super::grid::{Grid, Space, Stencil, ValueField};
use crate::config::Numerics;
use crate::error::{Error, Result};
use crate::flow::{fitted_weights, walk, Schedule, WalkEnd};
use crate::model::{epsilon_interior, value_bound, DiscreteKernel, ModelSpec, Point};
use crate::sim::Policy;

/// Boundary continuation `min_g c(z, g) + (R v)(z, g)` scaled by `weight`.
#[derive(Clone, Debug)]
struct BoundaryTerm {
    weight: f64,
    costs: Vec<f64>,
    rkeys: Vec<usize>,
}

impl BoundaryTerm {
    fn at(spec: &ModelSpec, z: &Point, weight: f64) -> BoundaryTerm {
        BoundaryTerm {
            weight,
            costs: (0..spec.n_boundary()).map(|g| spec.boundary_cost_at(z, g)).collect(),
            rkeys: (0..spec.n_boundary()).map(|g| spec.r_key(z, g)).collect(),
        }
    }

    fn argmin(&self, rv: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (g, (c, k)) in self.costs.iter().zip(&self.rkeys).enumerate() {
            let v = c + rv[*k];
            if v < best.0 {
                best = (v, g);
            }
        }
        best
    }
}

/// One open-loop schedule from one node, linear in the continuation values.
#[derive(Clone, Debug)]
struct Candidate {
    konst: f64,
    coef: Vec<(usize, f64)>,
    hit: Option<BoundaryTerm>,
}

impl Candidate {
    fn value(&self, qv: &[f64], rv: &[f64]) -> f64 {
        let mut s = self.konst;
        for &(k, c) in &self.coef {
            s += c * qv[k];
        }
        if let Some(b) = &self.hit {
            s += b.weight * b.argmin(rv).0;
        }
        s
    }
}

#[derive(Clone, Debug)]
enum NodeOp {
    Interior(Vec<Candidate>),
    Boundary(BoundaryTerm),
}

/// Kernel integrals `sum_i w_i v(y_i)` for every key, by interpolation.
#[derive(Clone, Debug)]
pub(crate) struct KernelStencils(Vec<Vec<(f64, Stencil)>>);

impl KernelStencils {
    pub(crate) fn new(k: &DiscreteKernel, grid: &Grid) -> Self {
        KernelStencils(
            k.table.iter().map(|atoms| atoms.iter().map(|a| (a.weight, grid.stencil(&a.point))).collect()).collect(),
        )
    }

    pub(crate) fn integrate(&self, values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.0.iter().map(|atoms| atoms.iter().map(|(w, s)| w * s.apply(values)).sum::<f64>()));
    }
}

/// The one-step operator `G` on a lattice, with the flow integrals of every candidate
/// schedule precomputed.
pub struct PrimalOperator<'a> {
    pub spec: &'a ModelSpec,
    pub num: &'a Numerics,
    pub grid: Grid,
    pub schedules: Vec<Vec<usize>>,
    pub eps_hat: f64,
    pub bound: f64,
    nodes: Vec<NodeOp>,
    q_st: KernelStencils,
    r_st: KernelStencils,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimalSolution {
    #[serde(skip)]
    pub field: ValueField,
    pub iterations: usize,
    pub sup_residual: f64,
    pub min_iterate: f64,
    pub max_iterate: f64,
    /// Error budget from cutting flows once the survival factor drops below `tail_tol`.
    pub truncation_budget: f64,
}

fn all_schedules(n_actions: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..n_actions).map(move |a| {
                    let mut t = s.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

impl<'a> PrimalOperator<'a> {
    pub fn new(spec: &'a ModelSpec, num: &'a Numerics, n: usize) -> Result<Self> {
        let eps_hat = epsilon_interior(spec, num)?;
        let grid = Grid::new(&spec.geometry, n);
        let schedules = all_schedules(spec.n_interior(), num.k_seg);
        let nodes = (0..grid.node_count())
            .into_par_iter()
            .map(|k| {
                let x = grid.node(k);
                if !grid.is_interior(k) {
                    return Ok(NodeOp::Boundary(BoundaryTerm::at(spec, &x, 1.0)));
                }
                schedules
                    .iter()
                    .map(|s| candidate(spec, num, &x, &Schedule::new(s, num.seg_len)))
                    .collect::<Result<Vec<_>>>()
                    .map(NodeOp::Interior)
            })
            .collect::<Result<Vec<_>>>()?;
        let q_st = KernelStencils::new(&spec.q, &grid);
        let r_st = KernelStencils::new(&spec.r, &grid);
        Ok(PrimalOperator { spec, num, grid, schedules, eps_hat, bound: value_bound(spec, eps_hat), nodes, q_st, r_st })
    }

    pub fn zero_field(&self) -> ValueField {
        ValueField::constant(self.grid.clone(), Space::Primal, 0.0)
    }

    fn kernel_values(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut qv, mut rv) = (Vec::new(), Vec::new());
        self.q_st.integrate(v, &mut qv);
        self.r_st.integrate(v, &mut rv);
        (qv, rv)
    }

    /// `G v` at every node.
    pub fn apply(&self, v: &ValueField) -> ValueField {
        let (qv, rv) = self.kernel_values(&v.values);
        let values = self
            .nodes
            .par_iter()
            .map(|op| match op {
                NodeOp::Boundary(b) => b.argmin(&rv).0,
                NodeOp::Interior(cands) => cands.iter().map(|c| c.value(&qv, &rv)).fold(f64::INFINITY, f64::min),
            })
            .collect();
        ValueField { grid: v.grid.clone(), space: Space::Primal, values }
    }

    /// Value iteration from `v = 0` until successive iterates differ by less than `tol`.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<PrimalSolution> {
        let mut v = self.zero_field();
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            let next = self.apply(&v);
            residual = next.sup_diff(&v);
            lo = lo.min(next.min());
            hi = hi.max(next.max());
            v = next;
            if residual < tol {
                return Ok(PrimalSolution {
                    field: v,
                    iterations: it,
                    sup_residual: residual,
                    min_iterate: lo,
                    max_iterate: hi,
                    truncation_budget: self.num.tail_tol * self.bound,
                });
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual })
    }

    /// Greedy policy of `v`: the minimizing schedule at each node and the minimizing boundary
    /// action, on the nearest-node cells of the lattice.
    pub fn extract_policy(&self, v: &ValueField) -> Policy {
        let (qv, rv) = self.kernel_values(&v.values);
        let grid = &self.grid;
        let mut interior = vec![0usize; grid.node_count()];
        let mut boundary = vec![0usize; grid.node_count()];
        for (k, op) in self.nodes.iter().enumerate() {
            if let NodeOp::Interior(cands) = op {
                let mut best = (f64::INFINITY, 0);
                for (ci, c) in cands.iter().enumerate() {
                    let val = c.value(&qv, &rv);
                    if val < best.0 {
                        best = (val, ci);
                    }
                }
                interior[k] = best.1;
            }
            boundary[k] = BoundaryTerm::at(self.spec, &grid.node(k), 1.0).argmin(&rv).1;
        }
        // boundary nodes borrow the schedule of the nearest interior node
        for k in grid.boundary_nodes() {
            let mut mi = grid.multi_index(k);
            for m in &mut mi[..grid.dim()] {
                *m = (*m).clamp(1, grid.n - 1);
            }
            interior[k] = interior[grid.flat_index(&mi)];
        }
        Policy {
            cells: grid.node_cells(),
            seg_len: self.num.seg_len,
            interior: interior.iter().map(|&c| self.schedules[c].clone()).collect(),
            boundary,
        }
    }
}

fn candidate(spec: &ModelSpec, num: &Numerics, x: &Point, sched: &Schedule<'_>) -> Result<Candidate> {
    let delta = spec.delta;
    let mut coef = vec![0.0; spec.q.len()];
    let mut konst = 0.0;
    let mut e = 0.0f64;
    let mut truncated = false;
    let mut prev: Option<(usize, f64, f64, usize)> = None;
    let node = |p: &Point, a: usize| (spec.running_cost_at(p, a), spec.rate_at(p, a), spec.q_key(p, a));
    let end = walk(spec, num, *x, sched, num.horizon, |st| {
        let a = st.action;
        let (f0, l0, k0) = match prev {
            Some((b, f, l, k)) if b == a => (f, l, k),
            _ => node(&st.x0, a),
        };
        let (f1, l1, k1) = node(&st.x1, a);
        prev = Some((a, f1, l1, k1));
        let h = st.len();
        if h <= 0.0 {
            return false;
        }
        let r = delta + 0.5 * (l0 + l1);
        let (wa, wb) = fitted_weights(r, h);
        let s = (-e).exp();
        let w0 = s * (wa - wb / h);
        let w1 = s * wb / h;
        konst += w0 * f0 + w1 * f1;
        coef[k0] += w0 * l0;
        coef[k1] += w1 * l1;
        e += h * r;
        if (-e).exp() < num.tail_tol {
            truncated = true;
            return true;
        }
        false
    })?;
    let hit = match end {
        WalkEnd::Hit { x: z, .. } if !truncated => Some(BoundaryTerm::at(spec, &z, (-e).exp())),
        _ => None,
    };
    let coef = coef.into_iter().enumerate().filter(|(_, c)| *c != 0.0).collect();
    Ok(Candidate { konst, coef, hit })
}

/// `F^v(x) = min_g c(x, g) + sum_R w v(atom)` with `v` interpolated at the atoms.
pub fn boundary_operator(spec: &ModelSpec, v: &ValueField, x: &Point) -> f64 {
    (0..spec.n_boundary())
        .map(|g| spec.boundary_cost_at(x, g) + spec.r.integrate(spec.r_key(x, g), |y| v.eval(y)))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_enumeration_is_lexicographic() {
        let s = all_schedules(2, 2);
        assert_eq!(s, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(all_schedules(3, 1).len(), 3);
    }
}
