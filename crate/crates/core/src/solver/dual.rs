//! Penalized sweep for the randomized value on `E x A0 x AGamma`.
//!
//! Switch intensities are chosen bang-bang at level `n`: on every flow step a set of
//! targets is switched to at rates `n lambda0(b)` (or `n lambdaGamma(c)`), the rest not at
//! all, which is the infimum of the generator over multipliers in `(0, n]`. The sweep walks
//! each stored flow path backwards and takes the cheapest set on each step, among the
//! prefixes of the targets ordered by value, so it is the minimum of monotone affine maps and
//! value iteration converges. Boundary nodes only carry the nonlocal condition
//! `w = c(x, j) + sum_R w(atom, i, j)`.

use rayon::prelude::*;
use serde::Serialize;

use super::grid::{Grid, Space, Stencil, ValueField};
use super::primal::KernelStencils;
use crate::config::Numerics;
use crate::error::{Error, Result};
use crate::flow::{fitted_weights, walk, Schedule, WalkEnd};
use crate::model::{epsilon_interior, value_bound, ModelSpec, Point};

#[derive(Clone, Debug)]
struct PathNode {
    st: Stencil,
    lam: f64,
    f: f64,
    qkey: usize,
    /// Length of the step to the next node (0 for the last node).
    h: f64,
}

#[derive(Clone, Debug)]
struct HitData {
    costs: Vec<f64>,
    rkeys: Vec<usize>,
}

impl HitData {
    fn at(spec: &ModelSpec, z: &Point) -> HitData {
        HitData {
            costs: (0..spec.n_boundary()).map(|g| spec.boundary_cost_at(z, g)).collect(),
            rkeys: (0..spec.n_boundary()).map(|g| spec.r_key(z, g)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
struct FlowPath {
    nodes: Vec<PathNode>,
    hit: Option<HitData>,
}

pub struct DualOperator<'a> {
    pub spec: &'a ModelSpec,
    pub num: &'a Numerics,
    pub grid: Grid,
    pub eps_hat: f64,
    pub bound: f64,
    /// `paths[node * n_interior + i]` for interior nodes.
    paths: Vec<Option<FlowPath>>,
    boundary: Vec<Option<HitData>>,
    q_st: KernelStencils,
    r_st: KernelStencils,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualSolution {
    #[serde(skip)]
    pub field: ValueField,
    pub n: f64,
    pub iterations: usize,
    pub sup_residual: f64,
    pub min_iterate: f64,
    pub max_iterate: f64,
}

fn flow_path(spec: &ModelSpec, num: &Numerics, grid: &Grid, x: &Point, i: usize) -> Result<FlowPath> {
    let node = |p: &Point| PathNode {
        st: grid.stencil(p),
        lam: spec.rate_at(p, i),
        f: spec.running_cost_at(p, i),
        qkey: spec.q_key(p, i),
        h: 0.0,
    };
    let mut nodes = vec![node(x)];
    let mut e = 0.0f64;
    let mut truncated = false;
    let end = walk(spec, num, *x, &Schedule::constant(&i), num.horizon, |st| {
        let next = node(&st.x1);
        let last = nodes.last_mut().expect("path starts with a node");
        last.h = st.len();
        e += st.len() * (spec.delta + 0.5 * (last.lam + next.lam));
        nodes.push(next);
        if (-e).exp() < num.tail_tol {
            truncated = true;
            return true;
        }
        false
    })?;
    let hit = match end {
        WalkEnd::Hit { x: z, .. } if !truncated => Some(HitData::at(spec, &z)),
        _ => None,
    };
    Ok(FlowPath { nodes, hit })
}

impl<'a> DualOperator<'a> {
    pub fn new(spec: &'a ModelSpec, num: &'a Numerics, n: usize) -> Result<Self> {
        let eps_hat = epsilon_interior(spec, num)?;
        let grid = Grid::new(&spec.geometry, n);
        let n0 = spec.n_interior();
        let paths = (0..grid.node_count() * n0)
            .into_par_iter()
            .map(|k| {
                let node = k / n0;
                if grid.is_interior(node) {
                    flow_path(spec, num, &grid, &grid.node(node), k % n0).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let boundary = (0..grid.node_count())
            .map(|k| (!grid.is_interior(k)).then(|| HitData::at(spec, &grid.node(k))))
            .collect();
        let q_st = KernelStencils::new(&spec.q, &grid);
        let r_st = KernelStencils::new(&spec.r, &grid);
        Ok(DualOperator {
            spec,
            num,
            eps_hat,
            bound: value_bound(spec, eps_hat),
            paths,
            boundary,
            q_st,
            r_st,
            grid,
        })
    }

    pub fn space(&self) -> Space {
        Space::Dual { n_interior: self.spec.n_interior(), n_boundary: self.spec.n_boundary() }
    }

    /// One sweep of the penalized operator at level `n`.
    pub fn apply(&self, w: &ValueField, n: f64) -> ValueField {
        let spec = self.spec;
        let (n0, ng) = (spec.n_interior(), spec.n_boundary());
        let pairs = n0 * ng;
        let nn = self.grid.node_count();
        // qw[key][j]: Q-integral of w(., i(key), j); rw[key][pair]: R-integral of w(., pair)
        let mut qw = vec![vec![0.0; ng]; spec.q.len()];
        let mut rw = vec![vec![0.0; pairs]; spec.r.len()];
        let mut buf = Vec::new();
        for p in 0..pairs {
            let vals = w.pair_values(p);
            self.q_st.integrate(vals, &mut buf);
            for (key, v) in buf.iter().enumerate() {
                if spec.q.action_of_key(key) == p / ng {
                    qw[key][p % ng] = *v;
                }
            }
            self.r_st.integrate(vals, &mut buf);
            for (key, v) in buf.iter().enumerate() {
                rw[key][p] = *v;
            }
        }
        let delta = spec.delta;
        let values: Vec<f64> = (0..pairs * nn)
            .into_par_iter()
            .map(|idx| {
                let (p, node) = (idx / nn, idx % nn);
                let (i, j) = (p / ng, p % ng);
                if let Some(b) = &self.boundary[node] {
                    return b.costs[j] + rw[b.rkeys[j]][p];
                }
                let path = self.paths[node * n0 + i].as_ref().expect("interior node has a path");
                // switch targets (pair, rate)
                let targets: Vec<(usize, f64)> = (0..n0)
                    .filter(|&b| b != i)
                    .map(|b| (b * ng + j, n * spec.lambda0[b]))
                    .chain((0..ng).filter(|&c| c != j).map(|c| (i * ng + c, n * spec.lambda_gamma[c])))
                    .collect();
                let mut order: Vec<(f64, f64, f64)> = Vec::with_capacity(targets.len());
                let mut v = match &path.hit {
                    Some(hd) => hd.costs[j] + rw[hd.rkeys[j]][p],
                    None => 0.0,
                };
                let last = path.nodes.len() - 1;
                for m in (0..last).rev() {
                    let (a, b) = (&path.nodes[m], &path.nodes[m + 1]);
                    let h = a.h;
                    if h <= 0.0 {
                        continue;
                    }
                    order.clear();
                    order.extend(
                        targets.iter().map(|&(q, k)| (a.st.apply(w.pair_values(q)), b.st.apply(w.pair_values(q)), k)),
                    );
                    order.sort_by(|x, y| x.0.total_cmp(&y.0));
                    let (mut r0, mut r1) = (a.lam, b.lam);
                    let mut s0 = a.f + a.lam * qw[a.qkey][j];
                    let mut s1 = b.f + b.lam * qw[b.qkey][j];
                    let step = |r0: f64, r1: f64, s0: f64, s1: f64| {
                        let rr = delta + 0.5 * (r0 + r1);
                        let (wa, wb) = fitted_weights(rr, h);
                        (wa - wb / h) * s0 + wb / h * s1 + (-rr * h).exp() * v
                    };
                    let mut best = step(r0, r1, s0, s1);
                    for &(t0, t1, k) in &order {
                        r0 += k;
                        r1 += k;
                        s0 += k * t0;
                        s1 += k * t1;
                        best = best.min(step(r0, r1, s0, s1));
                    }
                    v = best;
                }
                v
            })
            .collect();
        ValueField { grid: w.grid.clone(), space: w.space, values }
    }

    /// Penalized fixed point at level `n` by value iteration from `w = 0`.
    pub fn solve(&self, n: f64, tol: f64, max_iter: usize) -> Result<DualSolution> {
        let mut w = ValueField::constant(self.grid.clone(), self.space(), 0.0);
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            let next = self.apply(&w, n);
            residual = next.sup_diff(&w);
            lo = lo.min(next.min());
            hi = hi.max(next.max());
            w = next;
            if residual < tol {
                return Ok(DualSolution {
                    field: w,
                    n,
                    iterations: it,
                    sup_residual: residual,
                    min_iterate: lo,
                    max_iterate: hi,
                });
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual })
    }
}
