//! The enlarged process `(X, I, J)`: base-measure and intensity-controlled simulation, and
//! the Doleans-Dade weight that maps one onto the other.
//!
//! Interior jumps split into a state channel (rate `lambda`, kernel `Q`), switches of `I`
//! (rate `nu0(b) lambda0(b)`) and switches of `J` (rate `nuGamma(c) lambdaGamma(c)`).
//! Boundary hits jump through `R` and keep `(I, J)`.

use rand::distributions::Open01;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{fitted_integral, next_jump, walk, LegEnd, Schedule, Span};
use crate::model::{ModelSpec, Point};
use crate::rng::{par_paths, path_rng};
use crate::sim::{CostEstimate, Simulator};

const LOG_WEIGHT_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomizedState {
    pub x: Point,
    pub i: usize,
    pub j: usize,
}

/// Multipliers `nu0(cell, b)` and `nuGamma(cell, c)` on the model's cell partition.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityControl {
    pub n_cells: usize,
    pub nu0: Vec<f64>,
    pub nu_gamma: Vec<f64>,
    n0: usize,
    ng: usize,
}

impl IntensityControl {
    pub fn constant(spec: &ModelSpec, nu0: f64, nu_gamma: f64) -> Self {
        let n_cells = spec.geometry.cell_count();
        IntensityControl {
            n_cells,
            nu0: vec![nu0; n_cells * spec.n_interior()],
            nu_gamma: vec![nu_gamma; n_cells * spec.n_boundary()],
            n0: spec.n_interior(),
            ng: spec.n_boundary(),
        }
    }

    /// `nu0` varying by cell (the same for every target action), `nuGamma` constant.
    pub fn per_cell(spec: &ModelSpec, nu0_cells: &[f64], nu_gamma: f64) -> Result<Self> {
        let mut nu = Self::constant(spec, 1.0, nu_gamma);
        if nu0_cells.len() != nu.n_cells {
            return Err(Error::Config(format!("need {} nu0 cell values", nu.n_cells)));
        }
        for (row, &v) in nu.nu0.chunks_mut(nu.n0).zip(nu0_cells) {
            row.fill(v);
        }
        Ok(nu)
    }

    pub fn identity(spec: &ModelSpec) -> Self {
        Self::constant(spec, 1.0, 1.0)
    }

    pub fn check(&self, nu_min: f64, nu_max: f64) -> Result<()> {
        for &v in self.nu0.iter().chain(&self.nu_gamma) {
            if !(v >= nu_min && v <= nu_max) {
                return Err(Error::Config(format!("multiplier {v} outside [{nu_min}, {nu_max}]")));
            }
        }
        Ok(())
    }

    pub fn nu0_at(&self, cell: usize, b: usize) -> f64 {
        self.nu0[cell * self.n0 + b]
    }

    pub fn nu_gamma_at(&self, cell: usize, c: usize) -> f64 {
        self.nu_gamma[cell * self.ng + c]
    }

    pub fn max_multiplier(&self) -> f64 {
        self.nu0.iter().chain(&self.nu_gamma).copied().fold(0.0, f64::max)
    }

    /// Upper bound on `E[L_T^2]` under the base measure, exact for constant multipliers.
    ///
    /// Switches arrive at state-independent rates, so `L_T` is a product of Poisson
    /// exponential martingales with `E[L_T^2] = exp(T sum lambda (nu - 1)^2)`.
    pub fn weight_second_moment_bound(&self, spec: &ModelSpec, t: f64) -> f64 {
        let worst = |vals: &[f64], k: usize, m: usize| {
            (0..vals.len() / m).map(|c| (vals[c * m + k] - 1.0).powi(2)).fold(0.0, f64::max)
        };
        let a: f64 = (0..self.n0).map(|b| spec.lambda0[b] * worst(&self.nu0, b, self.n0)).sum();
        let g: f64 = (0..self.ng).map(|c| spec.lambda_gamma[c] * worst(&self.nu_gamma, c, self.ng)).sum();
        (t * (a + g)).exp()
    }

    /// `sum_b (1 - nu0) lambda0 + sum_c (1 - nuGamma) lambdaGamma` at `x`.
    fn compensator_gap(&self, spec: &ModelSpec, x: &Point) -> f64 {
        let cell = spec.geometry.cell_of(x);
        let a: f64 = (0..self.n0).map(|b| (1.0 - self.nu0_at(cell, b)) * spec.lambda0[b]).sum();
        let g: f64 = (0..self.ng).map(|c| (1.0 - self.nu_gamma_at(cell, c)) * spec.lambda_gamma[c]).sum();
        a + g
    }

    fn switch_total(&self, spec: &ModelSpec, x: &Point) -> f64 {
        let cell = spec.geometry.cell_of(x);
        let a: f64 = (0..self.n0).map(|b| self.nu0_at(cell, b) * spec.lambda0[b]).sum();
        let g: f64 = (0..self.ng).map(|c| self.nu_gamma_at(cell, c) * spec.lambda_gamma[c]).sum();
        a + g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Base measure: switch rates `lambda0(b)` and `lambdaGamma(c)`.
    Base,
    /// Rates multiplied by `nu`.
    Controlled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Start,
    /// Natural jump of `X` through `Q`.
    State,
    /// Predictable jump at the boundary through `R`.
    Boundary,
    ISwitch,
    JSwitch,
    Censored,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Start => "start",
            Channel::State => "state",
            Channel::Boundary => "boundary",
            Channel::ISwitch => "i_switch",
            Channel::JSwitch => "j_switch",
            Channel::Censored => "censored",
        }
    }

    /// Jump types: 1 for switches of `I`, 2 for switches of `J`, 3 for moves of `X`.
    pub fn decomposition_class(&self) -> Option<u8> {
        match self {
            Channel::ISwitch => Some(1),
            Channel::JSwitch => Some(2),
            Channel::State | Channel::Boundary => Some(3),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RandomizedEvent {
    pub t: f64,
    /// State after the event.
    pub state: RandomizedState,
    pub pre: Point,
    pub channel: Channel,
    pub pstar: usize,
    pub cost_so_far: f64,
    /// Log of the jump factor of the weight (0 for state and boundary jumps).
    pub log_factor: f64,
    /// Predictable compensator jump: 1 at boundary events, 0 otherwise.
    pub delta_a: u8,
    /// Running log-weight including this event (base mode only).
    pub log_weight: f64,
}

#[derive(Clone, Debug)]
pub struct RandomizedTrajectory {
    pub events: Vec<RandomizedEvent>,
    pub pstar: usize,
    pub discounted_cost: f64,
    pub horizon: f64,
    pub tail_bound: f64,
    /// `ln L^nu` at the horizon in base mode; 0 in controlled mode.
    pub log_weight: f64,
    pub mode: Mode,
    /// Length of the window the path was simulated on, used to replay its flows.
    pub t_end: f64,
}

impl RandomizedTrajectory {
    pub fn jump_count(&self) -> usize {
        self.events.iter().filter(|e| e.channel.decomposition_class().is_some()).count()
    }

    pub fn count(&self, ch: Channel) -> usize {
        self.events.iter().filter(|e| e.channel == ch).count()
    }

    /// Time of the `k`-th jump (1-based) of any channel.
    pub fn jump_time(&self, k: usize) -> Option<f64> {
        self.events.iter().filter(|e| e.channel.decomposition_class().is_some()).nth(k - 1).map(|e| e.t)
    }
}

fn check_log_weight(w: f64) -> Result<f64> {
    if w.abs() > LOG_WEIGHT_LIMIT || !w.is_finite() {
        Err(Error::WeightOverflow(w))
    } else {
        Ok(w)
    }
}

/// Channel rates at a point; `nu` applies only in controlled mode.
fn channel_rates(
    spec: &ModelSpec,
    nu: &IntensityControl,
    mode: Mode,
    x: &Point,
    i: usize,
    out: &mut Vec<f64>,
) {
    out.clear();
    let cell = spec.geometry.cell_of(x);
    out.push(spec.rate_at(x, i));
    for b in 0..spec.n_interior() {
        let m = if mode == Mode::Controlled { nu.nu0_at(cell, b) } else { 1.0 };
        out.push(m * spec.lambda0[b]);
    }
    for c in 0..spec.n_boundary() {
        let m = if mode == Mode::Controlled { nu.nu_gamma_at(cell, c) } else { 1.0 };
        out.push(m * spec.lambda_gamma[c]);
    }
}

/// Multiplier of the chosen switch interpolated inside the terminal step.
fn switch_multiplier(spec: &ModelSpec, nu: &IntensityControl, span: &Span, channel: Channel, target: usize) -> f64 {
    let c0 = spec.geometry.cell_of(&span.step.x0);
    let c1 = spec.geometry.cell_of(&span.step.x1);
    let (m0, m1) = match channel {
        Channel::ISwitch => (nu.nu0_at(c0, target), nu.nu0_at(c1, target)),
        Channel::JSwitch => (nu.nu_gamma_at(c0, target), nu.nu_gamma_at(c1, target)),
        _ => (1.0, 1.0),
    };
    span.lerp(m0, m1)
}

impl<'a> Simulator<'a> {
    /// Simulates the enlarged process on `[0, t_end]`, stopping early after `max_jumps` jumps.
    ///
    /// In base mode the path law does not depend on `nu`; `nu` only feeds the recorded
    /// log-weights.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate_randomized_window(
        &self,
        start: &RandomizedState,
        nu: &IntensityControl,
        mode: Mode,
        seed: u64,
        path: u64,
        t_end: f64,
        max_jumps: Option<usize>,
    ) -> Result<RandomizedTrajectory> {
        let spec = self.spec;
        let delta = spec.delta;
        let mut rng = path_rng(seed, path);
        let mut st = *start;
        let mut t = 0.0;
        let mut cost = 0.0;
        let mut pstar = 0;
        let mut logw = 0.0;
        let mut rates0 = Vec::new();
        let mut rates1 = Vec::new();
        let mut events = vec![RandomizedEvent {
            t: 0.0,
            state: st,
            pre: st.x,
            channel: Channel::Start,
            pstar: 0,
            cost_so_far: 0.0,
            log_factor: 0.0,
            delta_a: 0,
            log_weight: 0.0,
        }];
        let mut jumps = 0;
        let base_switch = spec.lambda0_total() + spec.lambda_gamma_total();
        loop {
            if events.len() > self.mc.max_events {
                return Err(Error::ExplodingJumps(self.mc.max_events));
            }
            if max_jumps.is_some_and(|m| jumps >= m) {
                break;
            }
            let u: f64 = rng.sample(Open01);
            let t_leg = t;
            let i = st.i;
            let sched = Schedule::constant(&i);
            let mut f_cache: Option<f64> = None;
            let mut gap_cache: Option<f64> = None;
            let leg = next_jump(
                spec,
                self.num,
                st.x,
                &sched,
                -u.ln(),
                t_end - t,
                |p, a| {
                    let s = match mode {
                        Mode::Base => base_switch,
                        Mode::Controlled => nu.switch_total(spec, p),
                    };
                    spec.rate_at(p, a) + s
                },
                |sp| {
                    let g0 = f_cache.unwrap_or_else(|| spec.running_cost_at(&sp.step.x0, i));
                    let g1 = spec.running_cost_at(&sp.step.x1, i);
                    f_cache = Some(g1);
                    cost += fitted_integral(delta * (t_leg + sp.step.t0), delta, sp.u, g0, sp.lerp(g0, g1));
                    if mode == Mode::Base {
                        let q0 = gap_cache.unwrap_or_else(|| nu.compensator_gap(spec, &sp.step.x0));
                        let q1 = nu.compensator_gap(spec, &sp.step.x1);
                        gap_cache = Some(q1);
                        logw += sp.trapezoid(q0, q1);
                    }
                },
            )?;
            t += leg.tau;
            if mode == Mode::Base {
                check_log_weight(logw)?;
            }
            let pre = leg.point;
            let (channel, log_factor, delta_a) = match leg.end {
                LegEnd::Censored => {
                    events.push(RandomizedEvent {
                        t,
                        state: RandomizedState { x: pre, ..st },
                        pre,
                        channel: Channel::Censored,
                        pstar,
                        cost_so_far: cost,
                        log_factor: 0.0,
                        delta_a: 0,
                        log_weight: logw,
                    });
                    break;
                }
                LegEnd::Boundary => {
                    cost += (-delta * t).exp() * spec.boundary_cost_at(&pre, st.j);
                    pstar += 1;
                    st.x = spec.r.sample(spec.r_key(&pre, st.j), rng.gen());
                    (Channel::Boundary, 0.0, 1)
                }
                LegEnd::Natural => {
                    let span = leg.last.expect("natural jump has a terminal span");
                    channel_rates(spec, nu, mode, &span.step.x0, i, &mut rates0);
                    channel_rates(spec, nu, mode, &span.step.x1, i, &mut rates1);
                    let total: f64 = rates0.iter().zip(&rates1).map(|(a, b)| span.lerp(*a, *b)).sum();
                    let pick = rng.gen::<f64>() * total;
                    let mut acc = 0.0;
                    let mut k = rates0.len() - 1;
                    for (idx, (a, b)) in rates0.iter().zip(&rates1).enumerate() {
                        acc += span.lerp(*a, *b);
                        if pick < acc {
                            k = idx;
                            break;
                        }
                    }
                    let n0 = spec.n_interior();
                    if k == 0 {
                        st.x = spec.q.sample(spec.q_key(&pre, i), rng.gen());
                        (Channel::State, 0.0, 0)
                    } else if k <= n0 {
                        st.x = pre;
                        st.i = k - 1;
                        let lf = if mode == Mode::Base {
                            switch_multiplier(spec, nu, &span, Channel::ISwitch, st.i).ln()
                        } else {
                            0.0
                        };
                        (Channel::ISwitch, lf, 0)
                    } else {
                        st.x = pre;
                        st.j = k - 1 - n0;
                        let lf = if mode == Mode::Base {
                            switch_multiplier(spec, nu, &span, Channel::JSwitch, st.j).ln()
                        } else {
                            0.0
                        };
                        (Channel::JSwitch, lf, 0)
                    }
                }
            };
            logw += log_factor;
            if mode == Mode::Base {
                check_log_weight(logw)?;
            }
            jumps += 1;
            events.push(RandomizedEvent {
                t,
                state: st,
                pre,
                channel,
                pstar,
                cost_so_far: cost,
                log_factor,
                delta_a,
                log_weight: logw,
            });
        }
        Ok(RandomizedTrajectory {
            events,
            pstar,
            discounted_cost: cost,
            horizon: t,
            tail_bound: self.tail_bound(t),
            log_weight: if mode == Mode::Base { logw } else { 0.0 },
            mode,
            t_end,
        })
    }

    pub fn simulate_randomized(
        &self,
        start: &RandomizedState,
        nu: &IntensityControl,
        mode: Mode,
        seed: u64,
        path: u64,
    ) -> Result<RandomizedTrajectory> {
        self.simulate_randomized_window(start, nu, mode, seed, path, self.t_stop(), None)
    }

    /// `L^nu_T` recomputed from a base-mode path by replaying its flows.
    pub fn girsanov_weight(&self, traj: &RandomizedTrajectory, nu: &IntensityControl, t: f64) -> Result<f64> {
        let spec = self.spec;
        let mut logw = 0.0;
        for w in traj.events.windows(2) {
            let (from, to) = (&w[0], &w[1]);
            if from.t >= t {
                break;
            }
            let i = from.state.i;
            let tau = to.t - from.t;
            let cover = (t - from.t).min(tau);
            let mut prev: Option<f64> = None;
            let mut factor = 0.0;
            walk(spec, self.num, from.state.x, &Schedule::constant(&i), traj.t_end - from.t, |st| {
                let h = st.len();
                let q0 = prev.unwrap_or_else(|| nu.compensator_gap(spec, &st.x0));
                let q1 = nu.compensator_gap(spec, &st.x1);
                prev = Some(q1);
                let u = (cover - st.t0).clamp(0.0, h);
                let span = Span { step: *st, h, u, r0: 0.0, r1: 0.0 };
                logw += span.trapezoid(q0, q1);
                if tau <= st.t1 {
                    if tau <= t - from.t && matches!(to.channel, Channel::ISwitch | Channel::JSwitch) {
                        let target = if to.channel == Channel::ISwitch { to.state.i } else { to.state.j };
                        let jspan = Span { u: (tau - st.t0).clamp(0.0, h), ..span };
                        factor = switch_multiplier(spec, nu, &jspan, to.channel, target).ln();
                    }
                    return true;
                }
                st.t1 >= cover
            })?;
            logw += factor;
        }
        Ok(check_log_weight(logw)?.exp())
    }

    /// Dual cost under `nu`, on `[0, horizon]` (the discount cutoff when `None`), either
    /// simulated under `nu` directly or reweighted from the base measure.
    pub fn dual_cost_mc(
        &self,
        start: &RandomizedState,
        nu: &IntensityControl,
        n_paths: usize,
        seed: u64,
        mode: Mode,
        horizon: Option<f64>,
    ) -> Result<CostEstimate> {
        let t_end = horizon.unwrap_or_else(|| self.t_stop());
        let runs = par_paths(n_paths, |p| {
            self.simulate_randomized_window(start, nu, mode, seed, p, t_end, None).map(|tr| {
                let w = if mode == Mode::Base { tr.log_weight.exp() } else { 1.0 };
                (w * tr.discounted_cost, tr.tail_bound)
            })
        });
        let mut costs = Vec::with_capacity(n_paths);
        let mut tail: f64 = 0.0;
        for r in runs {
            let (c, tb) = r?;
            costs.push(c);
            tail = tail.max(tb);
        }
        let tail = if horizon.is_some() { 0.0 } else { tail };
        Ok(CostEstimate::from_costs(&costs, tail))
    }
}

/// Dump rows `path,t,x1..xd,kind,action,pstar,cost_so_far,channel,log_weight`.
pub fn randomized_csv_rows(spec: &ModelSpec, path: usize, tr: &RandomizedTrajectory, out: &mut Vec<String>) {
    for e in &tr.events {
        let coords: Vec<String> = e.state.x.as_slice().iter().map(|v| format!("{v}")).collect();
        let kind = match e.channel {
            Channel::Start => "start",
            Channel::Boundary => "boundary",
            Channel::Censored => "censored",
            _ => "natural",
        };
        let action = format!(
            "{}|{}",
            spec.actions.interior[e.state.i].label, spec.actions.boundary[e.state.j].label
        );
        out.push(format!(
            "{path},{},{},{kind},{action},{},{},{},{}",
            e.t,
            coords.join(","),
            e.pstar,
            e.cost_so_far,
            e.channel.as_str(),
            e.log_weight
        ));
    }
}

pub fn randomized_csv_header(dim: usize) -> String {
    format!("{},channel,log_weight", crate::sim::trajectory_csv_header(dim))
}
