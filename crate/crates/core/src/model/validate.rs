use serde::Serialize;

use super::point::Point;
use super::spec::ModelSpec;
use crate::config::Numerics;
use crate::error::{Error, Result};
use crate::flow::boundary_hit_time;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Failure {
    Kernel,
    Discount,
    H0,
    Bound,
    Randomization,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    #[serde(skip)]
    failure: Failure,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    pub warnings: Vec<String>,
    /// Smallest boundary hitting time from an R atom; infinite when no atom reaches the boundary.
    pub epsilon_hat: f64,
    pub epsilon_censored: bool,
    pub pass: bool,
}

impl ValidationReport {
    fn push(&mut self, name: &'static str, failure: Failure, problems: Vec<String>, ok_detail: String) {
        let pass = problems.is_empty();
        let detail = if pass { ok_detail } else { problems.join("; ") };
        self.checks.push(AssumptionCheck { name, pass, detail, failure });
    }

    fn first_error(&self) -> Option<Error> {
        let c = self.checks.iter().find(|c| !c.pass)?;
        let d = c.detail.clone();
        Some(match c.failure {
            Failure::Kernel => Error::MalformedKernel(d),
            Failure::Discount => Error::NonpositiveDiscount(d.parse().unwrap_or(f64::NAN)),
            Failure::H0 => Error::H0Violation(d),
            Failure::Bound => Error::BoundViolation(d),
            Failure::Randomization => Error::NonpositiveRandomization(d),
        })
    }
}

/// `inf` over R atoms and interior actions of the boundary hitting time.
///
/// Returns `f64::INFINITY` when no atom reaches the boundary within `num.horizon`.
pub fn epsilon_interior(spec: &ModelSpec, num: &Numerics) -> Result<f64> {
    let mut eps = f64::INFINITY;
    for atom in spec.r.all_atoms() {
        for a in 0..spec.n_interior() {
            if let Some(t) = boundary_hit_time(spec, num, &atom.point, a, num.horizon)? {
                eps = eps.min(t);
            }
        }
    }
    Ok(eps)
}

/// Uniform bound `M_f/delta + C* M_c` with `C* = 1/(delta*eps) + 1`.
pub fn value_bound(spec: &ModelSpec, eps_hat: f64) -> f64 {
    let c_star = 1.0 / (spec.delta * eps_hat) + 1.0;
    spec.running_bound / spec.delta + c_star * spec.boundary_bound
}

fn bound_problems(
    what: &str,
    points: &[Point],
    n_actions: usize,
    bound: f64,
    eval: impl Fn(&Point, usize) -> f64,
) -> Vec<String> {
    let mut out = Vec::new();
    for p in points {
        for a in 0..n_actions {
            let v = eval(p, a);
            if !(v >= 0.0 && v <= bound) {
                out.push(format!("{what} = {v} at {p:?} (action {a}) outside [0, {bound}]"));
                return out;
            }
        }
    }
    out
}

/// Runs every assumption check and collects the outcomes without stopping at failures.
pub fn assess_model(spec: &ModelSpec, num: &Numerics) -> Result<ValidationReport> {
    let geom = &spec.geometry;
    let mut rep = ValidationReport {
        checks: Vec::new(),
        warnings: Vec::new(),
        epsilon_hat: f64::INFINITY,
        epsilon_censored: false,
        pass: false,
    };

    let mut p = Vec::new();
    if !(spec.delta > 0.0) {
        p.push(format!("{}", spec.delta));
    }
    rep.push("discount_positive", Failure::Discount, p, format!("delta = {}", spec.delta));

    let mut p = Vec::new();
    for (what, ws) in [("lambda0", &spec.lambda0), ("lambda_gamma", &spec.lambda_gamma)] {
        if let Some(w) = ws.iter().find(|w| !(**w > 0.0)) {
            p.push(format!("{what} weight {w}"));
        }
    }
    rep.push("randomization_positive", Failure::Randomization, p, "all weights positive".into());

    let mut p = Vec::new();
    for (what, k) in [("Q", &spec.q), ("R", &spec.r)] {
        for (key, sum) in k.weight_sums() {
            if (sum - 1.0).abs() > 1e-12 {
                p.push(format!("{what} key {key} weights sum to {sum}"));
            }
        }
    }
    rep.push("kernel_normalization", Failure::Kernel, p, "weights sum to 1".into());

    let mut p = Vec::new();
    for a in spec.q.all_atoms() {
        if !geom.is_interior(&a.point) {
            p.push(format!("Q atom {:?} not strictly interior", a.point));
        }
    }
    rep.push("q_atoms_interior", Failure::Kernel, p, "all Q atoms interior".into());

    let mut p = Vec::new();
    for a in spec.r.all_atoms() {
        if !geom.is_interior(&a.point) {
            p.push(format!("R atom {:?} lies on the boundary", a.point));
        }
    }
    rep.push("r_atoms_interior", Failure::H0, p, "all R atoms interior".into());

    let lattice = geom.sample_lattice(num.bound_samples);
    let boundary_pts: Vec<Point> = lattice.iter().copied().filter(|x| geom.on_boundary(x)).collect();
    let mut p = bound_problems("f", &lattice, spec.n_interior(), spec.running_bound, |x, a| {
        spec.running_cost_at(x, a)
    });
    p.extend(bound_problems("lambda", &lattice, spec.n_interior(), spec.rate_bound, |x, a| {
        spec.rate_at(x, a)
    }));
    p.extend(bound_problems("c", &boundary_pts, spec.n_boundary(), spec.boundary_bound, |x, g| {
        spec.boundary_cost_at(x, g)
    }));
    for a in 0..spec.n_interior() {
        for x in &lattice {
            let v = spec.drift_at(x, a);
            if v.as_slice().iter().any(|c| !c.is_finite()) {
                p.push(format!("drift of action {a} not finite at {x:?}"));
                break;
            }
        }
    }
    rep.push("bounds", Failure::Bound, p, format!("sampled on {} points", lattice.len()));

    let eps = epsilon_interior(spec, num)?;
    rep.epsilon_hat = eps;
    rep.epsilon_censored = eps.is_infinite();
    let mut p = Vec::new();
    if !(spec.epsilon0 > 0.0) {
        p.push(format!("declared epsilon {} not positive", spec.epsilon0));
    } else if eps < spec.epsilon0 {
        p.push(format!("an R atom reaches the boundary after {eps} < epsilon {}", spec.epsilon0));
    }
    let shown = if rep.epsilon_censored { format!(">= {} (censored)", num.horizon) } else { format!("{eps}") };
    rep.push("h0", Failure::H0, p, format!("epsilon_hat {shown}"));

    for x in &boundary_pts {
        let n = geom.outward_normal(x);
        for a in 0..spec.n_interior() {
            let flux = spec.drift_at(x, a).dot(&n);
            if flux.abs() < 1e-6 {
                rep.warnings.push(format!(
                    "drift of {} tangential at {x:?} (|h.n| = {flux:e})",
                    spec.actions.interior[a].label
                ));
            }
        }
    }

    rep.pass = rep.checks.iter().all(|c| c.pass);
    Ok(rep)
}

/// Like [`assess_model`], but returns the first failed assumption as a typed error.
pub fn validate_model(spec: &ModelSpec, num: &Numerics) -> Result<ValidationReport> {
    let rep = assess_model(spec, num)?;
    match rep.first_error() {
        Some(e) => Err(e),
        None => Ok(rep),
    }
}
