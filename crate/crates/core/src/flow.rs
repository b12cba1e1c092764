//! Deterministic flow between jumps: fixed-step RK4, boundary hitting by bisection on the
//! signed distance, and hazard quadrature on the integrator nodes.
//!
//! Rates are taken linear in time between integrator nodes. Hazards are therefore
//! trapezoid sums, and inside a step the hazard is an exact quadratic that can be inverted.

use crate::config::Numerics;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Point};

/// Open-loop action schedule: `actions[k]` on `[k*seg_len, (k+1)*seg_len)`, the last entry
/// persisting afterwards.
#[derive(Clone, Copy, Debug)]
pub struct Schedule<'a> {
    pub actions: &'a [usize],
    pub seg_len: f64,
}

impl<'a> Schedule<'a> {
    pub fn new(actions: &'a [usize], seg_len: f64) -> Self {
        assert!(!actions.is_empty());
        Schedule { actions, seg_len }
    }

    pub fn constant(action: &'a usize) -> Self {
        Schedule { actions: std::slice::from_ref(action), seg_len: f64::INFINITY }
    }

    fn segment_end(&self, k: usize) -> f64 {
        if k + 1 >= self.actions.len() {
            f64::INFINITY
        } else {
            (k + 1) as f64 * self.seg_len
        }
    }
}

pub fn rk4(model: &ModelSpec, x: &Point, a: usize, h: f64) -> Point {
    let k1 = model.drift_at(x, a);
    let k2 = model.drift_at(&x.axpy(0.5 * h, &k1), a);
    let k3 = model.drift_at(&x.axpy(0.5 * h, &k2), a);
    let k4 = model.drift_at(&x.axpy(h, &k3), a);
    let mut out = *x;
    for i in 0..x.dim() {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// One accepted integrator step `[t0, t1]` under a fixed action.
#[derive(Clone, Copy, Debug)]
pub struct Step {
    pub action: usize,
    pub t0: f64,
    pub t1: f64,
    pub x0: Point,
    pub x1: Point,
    /// `x1` is the (clipped) boundary hitting point.
    pub hit: bool,
}

impl Step {
    pub fn len(&self) -> f64 {
        self.t1 - self.t0
    }
}

#[derive(Clone, Copy, Debug)]
pub enum WalkEnd {
    Hit { t: f64, x: Point },
    Horizon { t: f64, x: Point },
    Stopped,
}

/// Steps the flow from `x0` until the boundary, the horizon, or `visit` returns true.
///
/// Step ends fall on multiples of `dt_flow` from the start, segment switches and the
/// horizon, so two walks from the same point share their nodes.
pub fn walk(
    model: &ModelSpec,
    num: &Numerics,
    x0: Point,
    sched: &Schedule<'_>,
    horizon: f64,
    mut visit: impl FnMut(&Step) -> bool,
) -> Result<WalkEnd> {
    let geom = &model.geometry;
    if geom.on_boundary(&x0) {
        return Ok(WalkEnd::Hit { t: 0.0, x: geom.snap(&x0) });
    }
    let max_move = geom.min_cell_width();
    let tol = geom.boundary_tolerance;
    let mut t = 0.0;
    let mut seg = 0;
    let mut switch = sched.segment_end(0);
    let mut x = x0;
    loop {
        if t >= horizon {
            return Ok(WalkEnd::Horizon { t, x });
        }
        while t >= switch {
            seg += 1;
            switch = sched.segment_end(seg);
        }
        let a = sched.actions[seg.min(sched.actions.len() - 1)];
        let t1 = (t + num.dt_flow).min(switch).min(horizon);
        let h = t1 - t;
        let x1 = rk4(model, &x, a, h);
        let moved = (x1 - x).norm();
        if moved > max_move {
            return Err(Error::StepTooLarge { step: moved, cell: max_move });
        }
        if geom.signed_distance(&x1) <= tol {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > num.tol_hit {
                let mid = 0.5 * (lo + hi);
                if geom.signed_distance(&rk4(model, &x, a, mid)) <= tol {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let xh = geom.snap(&rk4(model, &x, a, hi));
            let step = Step { action: a, t0: t, t1: t + hi, x0: x, x1: xh, hit: true };
            if visit(&step) {
                return Ok(WalkEnd::Stopped);
            }
            return Ok(WalkEnd::Hit { t: step.t1, x: xh });
        }
        let step = Step { action: a, t0: t, t1, x0: x, x1, hit: false };
        if visit(&step) {
            return Ok(WalkEnd::Stopped);
        }
        t = t1;
        x = x1;
    }
}

/// Flow-time integrand data for the part `[t0, t0 + u]` of a step of length `h`.
#[derive(Clone, Copy, Debug)]
pub struct Span {
    pub step: Step,
    pub h: f64,
    pub u: f64,
    /// Total rate at the step endpoints.
    pub r0: f64,
    pub r1: f64,
}

impl Span {
    pub fn theta(&self) -> f64 {
        if self.h > 0.0 {
            self.u / self.h
        } else {
            1.0
        }
    }

    /// Value at the end of the covered part of a quantity linear between the nodes.
    pub fn lerp(&self, g0: f64, g1: f64) -> f64 {
        g0 + (g1 - g0) * self.theta()
    }

    /// Trapezoid integral over the covered part of a quantity linear between the nodes.
    pub fn trapezoid(&self, g0: f64, g1: f64) -> f64 {
        0.5 * self.u * (g0 + self.lerp(g0, g1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LegEnd {
    Natural,
    Boundary,
    Censored,
}

#[derive(Clone, Copy, Debug)]
pub struct Leg {
    pub tau: f64,
    pub end: LegEnd,
    /// Position just before the jump (the hitting point for boundary legs).
    pub point: Point,
    /// Last integrated span; natural jumps use it to split the total rate into channels.
    pub last: Option<Span>,
    pub hazard: f64,
}

/// Runs the flow until the hazard of `rate` reaches `target` (natural jump), the flow
/// reaches the boundary, or `horizon` passes. `on_span` sees every integrated span in order.
#[allow(clippy::too_many_arguments)]
pub fn next_jump(
    model: &ModelSpec,
    num: &Numerics,
    x: Point,
    sched: &Schedule<'_>,
    target: f64,
    horizon: f64,
    mut rate: impl FnMut(&Point, usize) -> f64,
    mut on_span: impl FnMut(&Span),
) -> Result<Leg> {
    let mut hazard = 0.0;
    let mut cached: Option<(usize, f64)> = None;
    let mut jump: Option<(f64, Point, Span)> = None;
    let mut last: Option<Span> = None;
    let end = walk(model, num, x, sched, horizon, |st| {
        let r0 = match cached {
            Some((a, r)) if a == st.action => r,
            _ => rate(&st.x0, st.action),
        };
        let r1 = rate(&st.x1, st.action);
        cached = Some((st.action, r1));
        let h = st.len();
        let inc = 0.5 * h * (r0 + r1);
        if hazard + inc >= target && h > 0.0 {
            let need = target - hazard;
            let a2 = (r1 - r0) / (2.0 * h);
            let disc = (r0 * r0 + 4.0 * a2 * need).max(0.0);
            let denom = r0 + disc.sqrt();
            let u = if denom > 0.0 { (2.0 * need / denom).clamp(0.0, h) } else { h };
            let span = Span { step: *st, h, u, r0, r1 };
            on_span(&span);
            let point = if u >= h { st.x1 } else { rk4(model, &st.x0, st.action, u) };
            hazard = target;
            jump = Some((st.t0 + u, point, span));
            return true;
        }
        let span = Span { step: *st, h, u: h, r0, r1 };
        on_span(&span);
        last = Some(span);
        hazard += inc;
        false
    })?;
    Ok(match (end, jump) {
        (_, Some((tau, point, span))) => {
            Leg { tau, end: LegEnd::Natural, point, last: Some(span), hazard }
        }
        (WalkEnd::Hit { t, x }, None) => Leg { tau: t, end: LegEnd::Boundary, point: x, last, hazard },
        (WalkEnd::Horizon { t, x }, None) => Leg { tau: t, end: LegEnd::Censored, point: x, last, hazard },
        (WalkEnd::Stopped, None) => unreachable!("walk stops only after a jump is recorded"),
    })
}

#[derive(Clone, Debug)]
pub struct FlowSegment {
    pub start: Point,
    pub action: usize,
    pub duration: f64,
    pub end: Point,
    pub hit_boundary: bool,
    pub samples: Vec<(f64, Point)>,
}

pub fn integrate_flow(model: &ModelSpec, num: &Numerics, x: &Point, a: usize, t: f64) -> Result<FlowSegment> {
    let mut samples = vec![(0.0, *x)];
    let end = walk(model, num, *x, &Schedule::constant(&a), t, |st| {
        samples.push((st.t1, st.x1));
        false
    })?;
    let (duration, end_pt, hit) = match end {
        WalkEnd::Hit { t, x } => (t, x, true),
        WalkEnd::Horizon { t, x } => (t, x, false),
        WalkEnd::Stopped => unreachable!(),
    };
    if hit && samples.len() == 1 {
        samples[0].1 = end_pt;
    }
    Ok(FlowSegment { start: *x, action: a, duration, end: end_pt, hit_boundary: hit, samples })
}

pub fn boundary_hit_time(
    model: &ModelSpec,
    num: &Numerics,
    x: &Point,
    a: usize,
    horizon: f64,
) -> Result<Option<f64>> {
    let end = walk(model, num, *x, &Schedule::constant(&a), horizon, |_| false)?;
    Ok(match end {
        WalkEnd::Hit { t, .. } => Some(t),
        _ => None,
    })
}

/// `Lambda(s)`, the trapezoid hazard along the flow, stopping early at the boundary.
pub fn hazard_integral(model: &ModelSpec, num: &Numerics, x: &Point, a: usize, s: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut prev = model.rate_at(x, a);
    walk(model, num, *x, &Schedule::constant(&a), s, |st| {
        let r1 = model.rate_at(&st.x1, a);
        total += 0.5 * st.len() * (prev + r1);
        prev = r1;
        false
    })?;
    Ok(total)
}

/// `chi(s) = exp(-delta*s - Lambda(s))` for a constant action.
pub fn discounted_survival(model: &ModelSpec, num: &Numerics, x: &Point, a: usize, s: f64) -> Result<f64> {
    Ok((-model.delta * s - hazard_integral(model, num, x, a, s)?).exp())
}

/// Weights `(A, B)` of `int_0^h exp(-r u) (g0 + (g1 - g0) u / h) du = g0*A + (g1 - g0)*B/h`.
pub fn fitted_weights(r: f64, h: f64) -> (f64, f64) {
    let x = r * h;
    if x.abs() < 1e-3 {
        let a = h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        let b = h * h * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
        (a, b)
    } else {
        let a = -(-x).exp_m1() / r;
        let b = (1.0 - (-x).exp() * (1.0 + x)) / (r * r);
        (a, b)
    }
}

/// Integral of `exp(-r u) g(u)` over a step with `g` linear, entry-discount `e0` applied.
pub fn fitted_integral(e0: f64, r: f64, h: f64, g0: f64, g1: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    let (a, b) = fitted_weights(r, h);
    (-e0).exp() * (g0 * a + (g1 - g0) * b / h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_weights_match_quadrature() {
        for &(r, h) in &[(0.0, 0.1), (1e-5, 0.01), (1.0, 0.01), (50.0, 0.02), (2.0, 1.0)] {
            let (a, b) = fitted_weights(r, h);
            let n = 20000;
            let (mut qa, mut qb) = (0.0, 0.0);
            for i in 0..n {
                let u = (i as f64 + 0.5) / n as f64 * h;
                qa += (-r * u).exp() * h / n as f64;
                qb += (-r * u).exp() * u * h / n as f64;
            }
            assert!((a - qa).abs() < 1e-9 * h.max(1e-3), "A at r={r} h={h}");
            assert!((b - qb).abs() < 1e-9 * h.max(1e-3), "B at r={r} h={h}");
        }
    }
}
