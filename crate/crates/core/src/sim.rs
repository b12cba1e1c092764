//! Simulation of the primal controlled process and Monte Carlo policy evaluation.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{McConfig, Numerics};
use crate::error::{Error, Result};
use crate::flow::{fitted_integral, next_jump, LegEnd, Schedule};
use crate::model::{epsilon_interior, value_bound, CellPartition, ModelSpec, Point};
use crate::rng::{par_paths, path_rng};
use crate::stats::Summary;

/// Primal control: an open-loop schedule per cell restarting at each jump, and a boundary
/// action per cell of the hitting point.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub cells: CellPartition,
    pub seg_len: f64,
    /// `interior[cell]` holds `k_seg` interior action indices.
    pub interior: Vec<Vec<usize>>,
    pub boundary: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    #[serde(default)]
    pub cells: CellPartition,
    pub seg_len: f64,
    pub interior: Vec<Vec<String>>,
    pub boundary: Vec<String>,
}

impl Policy {
    pub fn constant(spec: &ModelSpec, a0: usize, ag: usize) -> Policy {
        Policy {
            cells: CellPartition::uniform_single(spec.dim()),
            seg_len: f64::INFINITY,
            interior: vec![vec![a0]],
            boundary: vec![ag],
        }
    }

    pub fn k_seg(&self) -> usize {
        self.interior.first().map_or(0, Vec::len)
    }

    pub fn schedule_at(&self, x: &Point) -> Schedule<'_> {
        Schedule::new(&self.interior[self.cells.cell_of(x)], self.seg_len)
    }

    pub fn boundary_at(&self, x: &Point) -> usize {
        self.boundary[self.cells.cell_of(x)]
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        let n = self.cells.cell_count(spec.dim());
        let bad = |m: &str| Err(Error::Config(format!("policy: {m}")));
        if self.interior.len() != n || self.boundary.len() != n {
            return bad("one interior and one boundary entry per cell required");
        }
        let k = self.k_seg();
        if k == 0 || self.interior.iter().any(|s| s.len() != k) {
            return bad("every cell needs the same positive number of segments");
        }
        if self.interior.iter().flatten().any(|&a| a >= spec.n_interior())
            || self.boundary.iter().any(|&g| g >= spec.n_boundary())
        {
            return bad("action index out of range");
        }
        if !(self.seg_len > 0.0) {
            return bad("seg_len must be positive");
        }
        Ok(())
    }

    pub fn to_file(&self, spec: &ModelSpec) -> PolicyFile {
        PolicyFile {
            cells: self.cells.clone(),
            seg_len: self.seg_len,
            interior: self
                .interior
                .iter()
                .map(|s| s.iter().map(|&a| spec.actions.interior[a].label.clone()).collect())
                .collect(),
            boundary: self.boundary.iter().map(|&g| spec.actions.boundary[g].label.clone()).collect(),
        }
    }

    pub fn from_file(file: &PolicyFile, spec: &ModelSpec) -> Result<Policy> {
        let unknown = |l: &str| Error::Config(format!("policy refers to unknown action {l}"));
        let interior = file
            .interior
            .iter()
            .map(|s| s.iter().map(|l| spec.interior_index(l).ok_or_else(|| unknown(l))).collect())
            .collect::<Result<Vec<Vec<usize>>>>()?;
        let boundary = file
            .boundary
            .iter()
            .map(|l| spec.boundary_index(l).ok_or_else(|| unknown(l)))
            .collect::<Result<Vec<usize>>>()?;
        let p = Policy { cells: file.cells.clone(), seg_len: file.seg_len, interior, boundary };
        p.check(spec)?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    Natural,
    Boundary,
    /// Truncation at the horizon or the discount cutoff.
    Censored,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::Natural => "natural",
            EventKind::Boundary => "boundary",
            EventKind::Censored => "censored",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub t: f64,
    /// Post-jump position.
    pub position: Point,
    /// Position just before the jump; on the boundary for boundary events.
    pub pre: Point,
    pub kind: EventKind,
    /// Interior action in force when the event happened (the first action for `Start`).
    pub action: usize,
    pub boundary_action: Option<usize>,
    pub pstar: usize,
    pub cost_so_far: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub events: Vec<Event>,
    pub pstar: usize,
    pub discounted_cost: f64,
    pub horizon: f64,
    pub tail_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub tail_bound: f64,
    pub n_paths: usize,
    pub min_path: f64,
    pub max_path: f64,
}

impl CostEstimate {
    pub fn from_costs(costs: &[f64], tail_bound: f64) -> CostEstimate {
        let s = Summary::of(costs);
        CostEstimate {
            mean: s.mean,
            std_error: s.std_error,
            tail_bound,
            n_paths: costs.len(),
            min_path: costs.iter().copied().fold(f64::INFINITY, f64::min),
            max_path: costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `mean +- (3 std_error + tail_bound)`.
    pub fn interval(&self) -> (f64, f64) {
        let w = 3.0 * self.std_error + self.tail_bound;
        (self.mean - w, self.mean + w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PstarStats {
    pub mean_pstar: f64,
    pub std_error: f64,
    pub bound: f64,
    pub bound_ok: bool,
}

/// `(tau, kind)` of the next jump from `x` for the hazard level `-ln u`.
pub fn sample_interjump(
    spec: &ModelSpec,
    num: &Numerics,
    x: &Point,
    sched: &Schedule<'_>,
    u: f64,
    t_max: f64,
) -> Result<(f64, LegEnd)> {
    let leg = next_jump(spec, num, *x, sched, -u.ln(), t_max, |p, a| spec.rate_at(p, a), |_| {})?;
    Ok((leg.tau, leg.end))
}

/// Shared inputs of the Monte Carlo routines.
#[derive(Clone, Copy, Debug)]
pub struct Simulator<'a> {
    pub spec: &'a ModelSpec,
    pub num: &'a Numerics,
    pub mc: &'a McConfig,
    pub eps_hat: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ModelSpec, num: &'a Numerics, mc: &'a McConfig) -> Result<Self> {
        let eps_hat = epsilon_interior(spec, num)?;
        Ok(Simulator { spec, num, mc, eps_hat })
    }

    /// Truncation time `min(T_max, ln(1/tail_tol)/delta)`.
    pub fn t_stop(&self) -> f64 {
        self.mc.t_max.min((1.0 / self.num.tail_tol).ln() / self.spec.delta)
    }

    pub fn value_bound(&self) -> f64 {
        value_bound(self.spec, self.eps_hat)
    }

    pub fn tail_bound(&self, t: f64) -> f64 {
        (-self.spec.delta * t).exp() * self.value_bound()
    }

    pub fn simulate_primal(&self, x: &Point, policy: &Policy, seed: u64, path: u64) -> Result<Trajectory> {
        self.simulate_until(x, policy, seed, path, self.t_stop())
    }

    /// Path on `[0, t_end]`; jumps after `t_end` are not taken.
    pub fn simulate_until(
        &self,
        x: &Point,
        policy: &Policy,
        seed: u64,
        path: u64,
        t_end: f64,
    ) -> Result<Trajectory> {
        let spec = self.spec;
        let delta = spec.delta;
        let mut rng = path_rng(seed, path);
        let mut t = 0.0;
        let mut pos = *x;
        let mut cost = 0.0;
        let mut pstar = 0;
        let first = policy.schedule_at(x).actions[0];
        let mut events = vec![Event {
            t: 0.0,
            position: pos,
            pre: pos,
            kind: EventKind::Start,
            action: first,
            boundary_action: None,
            pstar: 0,
            cost_so_far: 0.0,
        }];
        loop {
            if events.len() > self.mc.max_events {
                return Err(Error::ExplodingJumps(self.mc.max_events));
            }
            let sched = policy.schedule_at(&pos);
            let u: f64 = rng.sample(Open01);
            let t_leg = t;
            let mut f_cache: Option<(usize, f64)> = None;
            let leg = next_jump(
                spec,
                self.num,
                pos,
                &sched,
                -u.ln(),
                t_end - t,
                |p, a| spec.rate_at(p, a),
                |sp| {
                    let a = sp.step.action;
                    let g0 = match f_cache {
                        Some((b, g)) if b == a => g,
                        _ => spec.running_cost_at(&sp.step.x0, a),
                    };
                    let g1 = spec.running_cost_at(&sp.step.x1, a);
                    f_cache = Some((a, g1));
                    cost += fitted_integral(delta * (t_leg + sp.step.t0), delta, sp.u, g0, sp.lerp(g0, g1));
                },
            )?;
            t += leg.tau;
            let action = leg.last.map_or(sched.actions[0], |s| s.step.action);
            match leg.end {
                LegEnd::Natural => {
                    let key = spec.q_key(&leg.point, action);
                    pos = spec.q.sample(key, rng.gen());
                    events.push(Event {
                        t,
                        position: pos,
                        pre: leg.point,
                        kind: EventKind::Natural,
                        action,
                        boundary_action: None,
                        pstar,
                        cost_so_far: cost,
                    });
                }
                LegEnd::Boundary => {
                    let g = policy.boundary_at(&leg.point);
                    cost += (-delta * t).exp() * spec.boundary_cost_at(&leg.point, g);
                    pstar += 1;
                    pos = spec.r.sample(spec.r_key(&leg.point, g), rng.gen());
                    events.push(Event {
                        t,
                        position: pos,
                        pre: leg.point,
                        kind: EventKind::Boundary,
                        action,
                        boundary_action: Some(g),
                        pstar,
                        cost_so_far: cost,
                    });
                }
                LegEnd::Censored => {
                    events.push(Event {
                        t,
                        position: leg.point,
                        pre: leg.point,
                        kind: EventKind::Censored,
                        action,
                        boundary_action: None,
                        pstar,
                        cost_so_far: cost,
                    });
                    return Ok(Trajectory {
                        events,
                        pstar,
                        discounted_cost: cost,
                        horizon: t,
                        tail_bound: self.tail_bound(t),
                    });
                }
            }
        }
    }

    pub fn evaluate_policy_mc(&self, x: &Point, policy: &Policy, n_paths: usize, seed: u64) -> Result<CostEstimate> {
        let runs = par_paths(n_paths, |i| {
            self.simulate_primal(x, policy, seed, i).map(|tr| (tr.discounted_cost, tr.tail_bound))
        });
        let mut costs = Vec::with_capacity(n_paths);
        let mut tail: f64 = 0.0;
        for r in runs {
            let (c, tb) = r?;
            costs.push(c);
            tail = tail.max(tb);
        }
        Ok(CostEstimate::from_costs(&costs, tail))
    }

    /// Monte Carlo mean of `p*_t` against the bound `t/eps_hat + 1`.
    pub fn pstar_stats(&self, x: &Point, policy: &Policy, t: f64, n_paths: usize, seed: u64) -> Result<PstarStats> {
        let runs = par_paths(n_paths, |i| self.simulate_until(x, policy, seed, i, t).map(|tr| tr.pstar as f64));
        let counts = runs.into_iter().collect::<Result<Vec<f64>>>()?;
        let s = Summary::of(&counts);
        let bound = t / self.eps_hat + 1.0;
        Ok(PstarStats {
            mean_pstar: s.mean,
            std_error: s.std_error,
            bound,
            bound_ok: s.mean - 3.0 * s.std_error <= bound,
        })
    }
}

/// Trajectory rows `path,t,x1..xd,kind,action,pstar,cost_so_far`.
pub fn trajectory_csv_rows(spec: &ModelSpec, path: usize, tr: &Trajectory, out: &mut Vec<String>) {
    for e in &tr.events {
        let coords: Vec<String> = e.position.as_slice().iter().map(|v| format!("{v}")).collect();
        let action = match e.boundary_action {
            Some(g) => &spec.actions.boundary[g].label,
            None => &spec.actions.interior[e.action].label,
        };
        out.push(format!(
            "{path},{},{},{},{},{},{}",
            e.t,
            coords.join(","),
            e.kind.as_str(),
            action,
            e.pstar,
            e.cost_so_far
        ));
    }
}

pub fn trajectory_csv_header(dim: usize) -> String {
    let xs: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    format!("path,t,{},kind,action,pstar,cost_so_far", xs.join(","))
}
