use rand::Rng;
use serde::Serialize;

use super::grid::{Space, ValueField};
use super::primal::PrimalOperator;
use crate::error::Result;
use crate::model::{ModelSpec, Point};
use crate::randomized::{IntensityControl, Mode, RandomizedState};
use crate::rng::{par_paths, path_rng};
use crate::sim::Simulator;
use crate::stats::Summary;

#[derive(Clone, Debug, Serialize)]
pub struct ContractionEstimate {
    pub rho_hat: f64,
    /// Standard error of the estimate at the maximizing start.
    pub sigma: f64,
    pub argmax: Vec<f64>,
    pub argmax_pair: (usize, usize),
    pub n_starts: usize,
    pub n_samples: usize,
}

/// Interior points of a regular lattice with `per_axis` points per axis.
pub fn default_starts(spec: &ModelSpec, per_axis: usize) -> Vec<Point> {
    let g = &spec.geometry;
    g.sample_lattice(per_axis + 2).into_iter().filter(|p| g.is_interior(p)).collect()
}

/// `rho_hat = max over starts (x, a0, aGamma) of the Monte Carlo mean of exp(-delta T_2)`,
/// `T_2` the second jump time of the enlarged process under the base measure.
pub fn contraction_factor(sim: &Simulator<'_>, starts: &[Point], n_samples: usize, seed: u64) -> Result<ContractionEstimate> {
    let spec = sim.spec;
    let nu = IntensityControl::identity(spec);
    let t_end = sim.t_stop();
    let mut best = ContractionEstimate {
        rho_hat: f64::NEG_INFINITY,
        sigma: 0.0,
        argmax: Vec::new(),
        argmax_pair: (0, 0),
        n_starts: 0,
        n_samples,
    };
    let mut s_idx = 0u64;
    for x in starts {
        for i in 0..spec.n_interior() {
            for j in 0..spec.n_boundary() {
                let start = RandomizedState { x: *x, i, j };
                let base = s_idx * n_samples as u64;
                let draws = par_paths(n_samples, |k| {
                    sim.simulate_randomized_window(&start, &nu, Mode::Base, seed, base + k, t_end, Some(2))
                        .map(|tr| (-spec.delta * tr.jump_time(2).unwrap_or(tr.horizon)).exp())
                });
                let vals = draws.into_iter().collect::<Result<Vec<f64>>>()?;
                let s = Summary::of(&vals);
                if s.mean > best.rho_hat {
                    best.rho_hat = s.mean;
                    best.sigma = s.std_error;
                    best.argmax = x.as_slice().to_vec();
                    best.argmax_pair = (i, j);
                }
                best.n_starts += 1;
                s_idx += 1;
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoStageReport {
    /// `sup_interior |G^2 psi1 - G^2 psi2| / sup |psi1 - psi2|` per pair.
    pub ratios: Vec<f64>,
    pub threshold: f64,
    pub violations: usize,
}

/// Empirical two-stage contraction on random fields with values in `[0, bound]`.
pub fn two_stage_check(op: &PrimalOperator<'_>, n_pairs: usize, threshold: f64, seed: u64) -> TwoStageReport {
    let nn = op.grid.node_count();
    let field = |rng: &mut rand_chacha::ChaCha8Rng| ValueField {
        grid: op.grid.clone(),
        space: Space::Primal,
        values: (0..nn).map(|_| rng.gen::<f64>() * op.bound).collect(),
    };
    let mut ratios = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let mut rng = path_rng(seed, k as u64);
        let a = field(&mut rng);
        let b = field(&mut rng);
        let ga = op.apply(&op.apply(&a));
        let gb = op.apply(&op.apply(&b));
        ratios.push(ga.sup_diff_interior(&gb) / a.sup_diff(&b));
    }
    let violations = ratios.iter().filter(|&&r| r > threshold).count();
    TwoStageReport { ratios, threshold, violations }
}
