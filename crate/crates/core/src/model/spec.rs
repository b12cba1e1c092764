use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::functions::ScalarFn;
use super::geometry::DomainGeometry;
use super::kernel::{Atom, DiscreteKernel};
use super::point::Point;
use crate::error::{Error, Result};

/// Key that supplies a function for every action without an explicit entry.
pub const ANY_ACTION: &str = "*";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub label: String,
    /// Opaque parameters carried for bookkeeping; the function families do not read them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSets {
    pub interior: Vec<Action>,
    pub boundary: Vec<Action>,
}

/// Controlled PDMP model with every label resolved to an index.
///
/// Interior actions index `drift`, `rate`, `running_cost`, `lambda0` and the `q` kernel;
/// boundary actions index `boundary_cost`, `lambda_gamma` and the `r` kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct ModelSpec {
    pub geometry: DomainGeometry,
    pub actions: ActionSets,
    pub drift: Vec<Vec<ScalarFn>>,
    pub rate: Vec<ScalarFn>,
    pub rate_bound: f64,
    pub q: DiscreteKernel,
    pub r: DiscreteKernel,
    pub running_cost: Vec<ScalarFn>,
    pub running_bound: f64,
    pub boundary_cost: Vec<ScalarFn>,
    pub boundary_bound: f64,
    pub lambda0: Vec<f64>,
    pub lambda_gamma: Vec<f64>,
    pub delta: f64,
    pub epsilon0: f64,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn n_interior(&self) -> usize {
        self.actions.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.actions.boundary.len()
    }

    pub fn interior_index(&self, label: &str) -> Option<usize> {
        self.actions.interior.iter().position(|a| a.label == label)
    }

    pub fn boundary_index(&self, label: &str) -> Option<usize> {
        self.actions.boundary.iter().position(|a| a.label == label)
    }

    pub fn drift_at(&self, x: &Point, a: usize) -> Point {
        let mut v = Point::zeros(x.dim());
        for (i, f) in self.drift[a].iter().enumerate() {
            v[i] = f.eval(x);
        }
        v
    }

    pub fn rate_at(&self, x: &Point, a: usize) -> f64 {
        self.rate[a].eval(x)
    }

    pub fn running_cost_at(&self, x: &Point, a: usize) -> f64 {
        self.running_cost[a].eval(x)
    }

    pub fn boundary_cost_at(&self, x: &Point, g: usize) -> f64 {
        self.boundary_cost[g].eval(x)
    }

    pub fn q_key(&self, x: &Point, a: usize) -> usize {
        self.q.key(self.geometry.cell_of(x), a)
    }

    pub fn r_key(&self, x: &Point, g: usize) -> usize {
        self.r.key(self.geometry.cell_of(x), g)
    }

    pub fn lambda0_total(&self) -> f64 {
        self.lambda0.iter().sum()
    }

    pub fn lambda_gamma_total(&self) -> f64 {
        self.lambda_gamma.iter().sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    geometry: DomainGeometry,
    actions: ActionSets,
    dynamics: DynamicsFile,
    kernels: KernelsFile,
    costs: CostsFile,
    randomization: RandomizationFile,
    discount: f64,
    h0_epsilon: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsFile {
    drift: BTreeMap<String, Vec<ScalarFn>>,
    rate: BTreeMap<String, ScalarFn>,
    rate_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelsFile {
    interior: Vec<KernelEntry>,
    boundary: Vec<KernelEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelEntry {
    /// `None` applies the entry to every cell; explicit cells override it.
    #[serde(default)]
    cell: Option<usize>,
    action: String,
    atoms: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostsFile {
    running: BTreeMap<String, ScalarFn>,
    running_bound: f64,
    boundary: BTreeMap<String, ScalarFn>,
    boundary_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomizationFile {
    lambda0: BTreeMap<String, f64>,
    lambda_gamma: BTreeMap<String, f64>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedModel(msg.into())
}

fn check_labels(kind: &str, actions: &[Action]) -> Result<()> {
    if actions.is_empty() {
        return Err(malformed(format!("{kind} action set is empty")));
    }
    for (i, a) in actions.iter().enumerate() {
        if a.label.is_empty() || a.label == ANY_ACTION {
            return Err(malformed(format!("invalid {kind} action label {:?}", a.label)));
        }
        if actions[..i].iter().any(|b| b.label == a.label) {
            return Err(malformed(format!("duplicate {kind} action label {}", a.label)));
        }
    }
    Ok(())
}

fn check_keys<T>(what: &str, map: &BTreeMap<String, T>, actions: &[Action]) -> Result<()> {
    for k in map.keys() {
        if k != ANY_ACTION && !actions.iter().any(|a| &a.label == k) {
            return Err(malformed(format!("{what} refers to unknown action {k}")));
        }
    }
    Ok(())
}

fn per_action<T: Clone>(what: &str, map: &BTreeMap<String, T>, actions: &[Action]) -> Result<Vec<T>> {
    check_keys(what, map, actions)?;
    actions
        .iter()
        .map(|a| {
            map.get(&a.label)
                .or_else(|| map.get(ANY_ACTION))
                .cloned()
                .ok_or_else(|| malformed(format!("{what} missing for action {}", a.label)))
        })
        .collect()
}

fn compile_kernel(
    what: &str,
    entries: &[KernelEntry],
    actions: &[Action],
    n_cells: usize,
    dim: usize,
) -> Result<DiscreteKernel> {
    let n_actions = actions.len();
    let mut table: Vec<Option<Vec<Atom>>> = vec![None; n_cells * n_actions];
    // global entries first, so per-cell entries override regardless of file order
    let mut ordered: Vec<&KernelEntry> = entries.iter().filter(|e| e.cell.is_none()).collect();
    ordered.extend(entries.iter().filter(|e| e.cell.is_some()));
    for e in ordered {
        let a = actions
            .iter()
            .position(|x| x.label == e.action)
            .ok_or_else(|| malformed(format!("{what} kernel refers to unknown action {}", e.action)))?;
        if e.atoms.is_empty() {
            return Err(Error::MalformedKernel(format!("{what} kernel entry without atoms")));
        }
        let mut atoms = Vec::with_capacity(e.atoms.len());
        for raw in &e.atoms {
            if raw.len() != dim + 1 {
                return Err(Error::MalformedKernel(format!(
                    "{what} atom {raw:?} must hold {dim} coordinates and a weight"
                )));
            }
            let weight = raw[dim];
            if !(weight >= 0.0) || raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedKernel(format!("{what} atom {raw:?} has an invalid weight")));
            }
            atoms.push(Atom { point: Point::from_slice(&raw[..dim]), weight });
        }
        match e.cell {
            None => (0..n_cells).for_each(|c| table[c * n_actions + a] = Some(atoms.clone())),
            Some(c) if c < n_cells => table[c * n_actions + a] = Some(atoms),
            Some(c) => return Err(malformed(format!("{what} kernel cell {c} out of range"))),
        }
    }
    let table = table
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            t.ok_or_else(|| {
                Error::MalformedKernel(format!(
                    "{what} kernel undefined for cell {} action {}",
                    k / n_actions,
                    actions[k % n_actions].label
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteKernel { n_cells, n_actions, table })
}

fn kernel_entries(k: &DiscreteKernel, actions: &[Action]) -> Vec<KernelEntry> {
    let raw = |atoms: &[Atom]| -> Vec<Vec<f64>> {
        atoms
            .iter()
            .map(|a| {
                let mut v = a.point.as_slice().to_vec();
                v.push(a.weight);
                v
            })
            .collect()
    };
    let mut out = Vec::new();
    for (a, action) in actions.iter().enumerate() {
        let first = k.atoms(0, a);
        if (1..k.n_cells).all(|c| k.atoms(c, a) == first) {
            out.push(KernelEntry { cell: None, action: action.label.clone(), atoms: raw(first) });
        } else {
            for c in 0..k.n_cells {
                out.push(KernelEntry { cell: Some(c), action: action.label.clone(), atoms: raw(k.atoms(c, a)) });
            }
        }
    }
    out
}

impl TryFrom<ModelFile> for ModelSpec {
    type Error = Error;

    fn try_from(m: ModelFile) -> Result<Self> {
        m.geometry.check()?;
        let dim = m.geometry.dim();
        check_labels("interior", &m.actions.interior)?;
        check_labels("boundary", &m.actions.boundary)?;
        let a0 = &m.actions.interior;
        let ag = &m.actions.boundary;

        let drift = per_action("drift", &m.dynamics.drift, a0)?;
        for (a, d) in drift.iter().enumerate() {
            if d.len() != dim {
                return Err(malformed(format!("drift of {} needs {dim} components", a0[a].label)));
            }
            d.iter().try_for_each(|f| f.check(dim))?;
        }
        let rate = per_action("rate", &m.dynamics.rate, a0)?;
        let running_cost = per_action("running cost", &m.costs.running, a0)?;
        let boundary_cost = per_action("boundary cost", &m.costs.boundary, ag)?;
        for f in rate.iter().chain(&running_cost).chain(&boundary_cost) {
            f.check(dim)?;
        }

        let weights = |what: &str, map: &BTreeMap<String, f64>, acts: &[Action]| -> Result<Vec<f64>> {
            per_action(what, map, acts)
        };
        let lambda0 = weights("lambda0", &m.randomization.lambda0, a0)?;
        let lambda_gamma = weights("lambda_gamma", &m.randomization.lambda_gamma, ag)?;

        let n_cells = m.geometry.cell_count();
        let q = compile_kernel("interior", &m.kernels.interior, a0, n_cells, dim)?;
        let r = compile_kernel("boundary", &m.kernels.boundary, ag, n_cells, dim)?;

        for (name, v) in [
            ("rate_bound", m.dynamics.rate_bound),
            ("running_bound", m.costs.running_bound),
            ("boundary_bound", m.costs.boundary_bound),
            ("discount", m.discount),
            ("h0_epsilon", m.h0_epsilon),
        ] {
            if !v.is_finite() {
                return Err(malformed(format!("{name} must be finite")));
            }
        }

        Ok(ModelSpec {
            geometry: m.geometry,
            actions: m.actions,
            drift,
            rate,
            rate_bound: m.dynamics.rate_bound,
            q,
            r,
            running_cost,
            running_bound: m.costs.running_bound,
            boundary_cost,
            boundary_bound: m.costs.boundary_bound,
            lambda0,
            lambda_gamma,
            delta: m.discount,
            epsilon0: m.h0_epsilon,
        })
    }
}

impl From<ModelSpec> for ModelFile {
    fn from(s: ModelSpec) -> Self {
        let by_label = |acts: &[Action], vals: &[ScalarFn]| -> BTreeMap<String, ScalarFn> {
            acts.iter().zip(vals).map(|(a, f)| (a.label.clone(), f.clone())).collect()
        };
        let weights = |acts: &[Action], vals: &[f64]| -> BTreeMap<String, f64> {
            acts.iter().zip(vals).map(|(a, w)| (a.label.clone(), *w)).collect()
        };
        let a0 = &s.actions.interior;
        let ag = &s.actions.boundary;
        ModelFile {
            dynamics: DynamicsFile {
                drift: a0.iter().zip(&s.drift).map(|(a, d)| (a.label.clone(), d.clone())).collect(),
                rate: by_label(a0, &s.rate),
                rate_bound: s.rate_bound,
            },
            kernels: KernelsFile { interior: kernel_entries(&s.q, a0), boundary: kernel_entries(&s.r, ag) },
            costs: CostsFile {
                running: by_label(a0, &s.running_cost),
                running_bound: s.running_bound,
                boundary: by_label(ag, &s.boundary_cost),
                boundary_bound: s.boundary_bound,
            },
            randomization: RandomizationFile {
                lambda0: weights(a0, &s.lambda0),
                lambda_gamma: weights(ag, &s.lambda_gamma),
            },
            discount: s.delta,
            h0_epsilon: s.epsilon0,
            geometry: s.geometry,
            actions: s.actions,
        }
    }
}
