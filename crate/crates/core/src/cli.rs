//! `pdmp` command-line front end.
//!
//! Exit codes: 0 pass, 1 check failure, 2 usage or config error, 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{assess_model, validate_model, ModelSpec, Point};
use crate::randomized::{IntensityControl, Mode, RandomizedState};
use crate::sim::{trajectory_csv_header, trajectory_csv_rows, Policy, PolicyFile, Simulator};
use crate::solver::{contraction_factor, default_starts, residual_report, DualOperator, PrimalOperator};
use crate::verify::{check_invariants, dual_primal_gap, level_changes, spreads, CheckInput, CheckReport, Suite};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pdmp", version, about = "Optimal control of piecewise deterministic processes on a box")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Verification suite for `check`; all suites when omitted.
    #[arg(long, global = true)]
    pub suite: Option<String>,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the model assumptions.
    Validate,
    /// Solve for the value function and its greedy policy.
    Solve,
    /// Penalized dual values across the penalty schedule.
    Dual,
    /// Dump simulated trajectories.
    Simulate,
    /// Price a policy file by simulation.
    Evaluate,
    /// Run verification suites.
    Check,
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    spec: ModelSpec,
    out: PathBuf,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Ctx> {
        let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(seed) = cli.seed {
            cfg.mc.seed = seed;
        }
        let spec = ModelSpec::load(&cfg.model)?;
        let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out)?;
        Ok(Ctx { cfg, spec, out })
    }

    fn starts(&self) -> Result<Vec<Point>> {
        if self.cfg.starts.is_empty() {
            return Ok(default_starts(&self.spec, 3));
        }
        self.cfg
            .starts
            .iter()
            .map(|s| {
                let p = Point::from_slice(s);
                if s.len() != self.spec.dim() || !self.spec.geometry.is_interior(&p) {
                    return Err(Error::Config(format!("start {s:?} is not an interior point")));
                }
                Ok(p)
            })
            .collect()
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    let ctx = Ctx::load(cli)?;
    match cli.command {
        Command::Validate => validate(&ctx),
        Command::Solve => solve(&ctx),
        Command::Dual => dual(&ctx),
        Command::Simulate => simulate(&ctx),
        Command::Evaluate => evaluate(&ctx),
        Command::Check => check(&ctx, cli.suite.as_deref()),
    }
}

fn stamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# generated at unix time {secs}")
}

/// CSV with a `#` timestamp line, a header row and LF line ends.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", stamp())?;
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn validate(ctx: &Ctx) -> Result<i32> {
    let report = assess_model(&ctx.spec, &ctx.cfg.numerics)?;
    write_json(&ctx.out.join("validation.json"), &report)?;
    for c in &report.checks {
        println!("{:<24} {}  {}", c.name, if c.pass { "ok  " } else { "FAIL" }, c.detail);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if report.pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn solve(ctx: &Ctx) -> Result<i32> {
    let (spec, num) = (&ctx.spec, &ctx.cfg.numerics);
    validate_model(spec, num)?;
    let op = PrimalOperator::new(spec, num, num.grid_n)?;
    let sol = op.solve(num.tol, num.max_iter)?;
    let policy = op.extract_policy(&sol.field);
    let sim = Simulator::new(spec, num, &ctx.cfg.mc)?;
    let starts = default_starts(spec, 3);
    let per = (ctx.cfg.mc.n_paths / (starts.len() * spec.n_interior() * spec.n_boundary())).max(200);
    let rho = contraction_factor(&sim, &starts, per, ctx.cfg.mc.seed)?;
    let residuals = residual_report(spec, &sol.field);
    let bound_ok = sol.min_iterate >= 0.0 && sol.max_iterate <= op.bound;
    let report = json!({
        "iterations": sol.iterations,
        "sup_residual": sol.sup_residual,
        "rho_hat": rho.rho_hat,
        "rho_sigma": rho.sigma,
        "bound_check": {
            "min_iterate": sol.min_iterate,
            "max_iterate": sol.max_iterate,
            "bound": op.bound,
            "epsilon_hat": finite_or_null(op.eps_hat),
            "pass": bound_ok,
        },
        "grid": { "lower": op.grid.lower, "upper": op.grid.upper, "n": op.grid.n },
        "truncation_budget": sol.truncation_budget,
        "hjb_residual": residuals,
    });
    write_json(&ctx.out.join("solve_report.json"), &report)?;
    let labels = labels(spec);
    let (header, rows) = sol.field.csv(&labels.0, &labels.1);
    write_csv(&ctx.out.join("value.csv"), &header, &rows)?;
    write_json(&ctx.out.join("policy.json"), &policy.to_file(spec))?;
    println!(
        "solved in {} iterations, sup residual {:e}, rho_hat {:.4}, values in [{:.6}, {:.6}]",
        sol.iterations,
        sol.sup_residual,
        rho.rho_hat,
        sol.field.min(),
        sol.field.max()
    );
    Ok(if bound_ok { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn labels(spec: &ModelSpec) -> (Vec<String>, Vec<String>) {
    (
        spec.actions.interior.iter().map(|a| a.label.clone()).collect(),
        spec.actions.boundary.iter().map(|a| a.label.clone()).collect(),
    )
}

fn dual(ctx: &Ctx) -> Result<i32> {
    let (spec, num, mc) = (&ctx.spec, &ctx.cfg.numerics, &ctx.cfg.mc);
    validate_model(spec, num)?;
    let primal = PrimalOperator::new(spec, num, num.grid_n)?.solve(num.tol, num.max_iter)?;
    let op = DualOperator::new(spec, num, num.grid_n)?;
    let labels = labels(spec);
    let mut levels = Vec::new();
    let mut prev = None;
    let mut last = None;
    for &n in &num.n_schedule {
        let sol = op.solve(n, num.tol, num.max_iter)?;
        let (inner, outer) = spreads(&sol.field);
        let (inc, dec) = prev.as_ref().map(|p| level_changes(p, &sol.field)).unwrap_or((0.0, 0.0));
        levels.push(json!({
            "n": n,
            "iterations": sol.iterations,
            "sup_residual": sol.sup_residual,
            "interior_spread": inner,
            "boundary_spread": outer,
            "primal_gap": dual_primal_gap(&sol.field, &primal.field),
            "max_increase_from_previous": inc,
            "max_decrease_from_previous": dec,
        }));
        let (header, rows) = sol.field.csv(&labels.0, &labels.1);
        write_csv(&ctx.out.join(format!("dual_n{n}.csv")), &header, &rows)?;
        prev = Some(sol.field.clone());
        last = Some(sol);
    }
    let last = last.expect("schedule is nonempty");
    // V is the infimum over intensity controls, so any fixed control prices above it
    let sim = Simulator::new(spec, num, mc)?;
    let nu = IntensityControl::identity(spec);
    let mut spots = Vec::new();
    let mut spots_ok = true;
    for (k, x) in ctx.starts()?.iter().enumerate() {
        for i in 0..spec.n_interior() {
            for j in 0..spec.n_boundary() {
                let start = RandomizedState { x: *x, i, j };
                let s = mc.seed.wrapping_add((k * 64 + i * 8 + j) as u64 * 7919);
                let est = sim.dual_cost_mc(&start, &nu, mc.n_paths, s, Mode::Controlled, None)?;
                let w = last.field.eval_pair(x, i * spec.n_boundary() + j);
                let ok = w <= est.mean + 3.0 * est.std_error + est.tail_bound;
                spots_ok &= ok;
                spots.push(json!({
                    "x": x.as_slice(), "a0": labels.0[i], "aGamma": labels.1[j],
                    "w": w, "identity_cost": est.mean, "std_error": est.std_error, "pass": ok,
                }));
            }
        }
    }
    write_json(&ctx.out.join("dual_report.json"), &json!({ "levels": levels, "spot_checks": spots }))?;
    for l in &levels {
        println!("n={} spread={} gap={}", l["n"], l["interior_spread"], l["primal_gap"]);
    }
    Ok(if spots_ok { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn load_or_solve_policy(ctx: &Ctx) -> Result<Policy> {
    let (spec, num) = (&ctx.spec, &ctx.cfg.numerics);
    match &ctx.cfg.policy {
        Some(p) => {
            let file: PolicyFile = serde_json::from_str(&fs::read_to_string(p)?)?;
            Policy::from_file(&file, spec)
        }
        None => {
            let op = PrimalOperator::new(spec, num, num.grid_n)?;
            let sol = op.solve(num.tol, num.max_iter)?;
            Ok(op.extract_policy(&sol.field))
        }
    }
}

fn simulate(ctx: &Ctx) -> Result<i32> {
    let (spec, num, mc) = (&ctx.spec, &ctx.cfg.numerics, &ctx.cfg.mc);
    validate_model(spec, num)?;
    let policy = load_or_solve_policy(ctx)?;
    let sim = Simulator::new(spec, num, mc)?;
    let mut rows = Vec::new();
    let mut path = 0usize;
    for x in ctx.starts()? {
        let runs = crate::rng::par_paths(mc.n_paths, |p| sim.simulate_primal(&x, &policy, mc.seed, path as u64 + p));
        for tr in runs {
            trajectory_csv_rows(spec, path, &tr?, &mut rows);
            path += 1;
        }
    }
    write_csv(&ctx.out.join("trajectories.csv"), &trajectory_csv_header(spec.dim()), &rows)?;
    println!("{path} trajectories, {} events", rows.len());
    Ok(EXIT_PASS)
}

fn evaluate(ctx: &Ctx) -> Result<i32> {
    let (spec, num, mc) = (&ctx.spec, &ctx.cfg.numerics, &ctx.cfg.mc);
    validate_model(spec, num)?;
    if ctx.cfg.policy.is_none() {
        return Err(Error::Config("evaluate needs `policy` in the config".into()));
    }
    let policy = load_or_solve_policy(ctx)?;
    let sim = Simulator::new(spec, num, mc)?;
    let mut rows = Vec::new();
    for (k, x) in ctx.starts()?.iter().enumerate() {
        let est = sim.evaluate_policy_mc(x, &policy, mc.n_paths, mc.seed.wrapping_add(k as u64))?;
        let coords: Vec<String> = x.as_slice().iter().map(|v| format!("{v}")).collect();
        rows.push(format!(
            "{},{},{},{},{}",
            coords.join(","),
            est.mean,
            est.std_error,
            est.tail_bound,
            est.n_paths
        ));
        println!("x={:?} cost={:.6} +- {:.2e}", x.as_slice(), est.mean, est.std_error);
    }
    let mut header: Vec<String> = (1..=spec.dim()).map(|i| format!("x{i}")).collect();
    header.extend(["mean", "std_error", "tail_bound", "n_paths"].map(String::from));
    write_csv(&ctx.out.join("evaluation.csv"), &header.join(","), &rows)?;
    Ok(EXIT_PASS)
}

fn check(ctx: &Ctx, suite: Option<&str>) -> Result<i32> {
    let (spec, num, mc) = (&ctx.spec, &ctx.cfg.numerics, &ctx.cfg.mc);
    validate_model(spec, num)?;
    let suites = match suite {
        Some(s) => vec![s.parse::<Suite>()?],
        None => Suite::ALL.to_vec(),
    };
    let mut input = CheckInput::new(spec, num, mc);
    input.starts = ctx.starts()?;
    input.girsanov = ctx.cfg.girsanov.clone();
    let mut code = EXIT_PASS;
    for s in suites {
        let report: CheckReport = check_invariants(s, &input, mc.seed);
        write_json(&ctx.out.join(format!("check_{s}.json")), &report)?;
        write_csv(&ctx.out.join(format!("check_{s}.csv")), CheckReport::csv_header(), &report.csv_rows())?;
        for c in &report.checks {
            let status = if c.error.is_some() {
                "ERROR"
            } else if c.underpowered {
                "UNDERPOWERED"
            } else if c.pass {
                "pass"
            } else {
                "FAIL"
            };
            println!("{s} {} {status} statistic={:e} threshold={:e}", c.name, c.statistic, c.threshold);
            if let Some(e) = &c.error {
                eprintln!("{s} {}: {e}", c.name);
            }
        }
        if report.has_numerical_error() {
            code = EXIT_NUMERICAL;
        } else if !report.pass && code == EXIT_PASS {
            code = EXIT_CHECK_FAILED;
        }
    }
    Ok(code)
}
