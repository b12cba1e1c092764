use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt_flow: f64,
    pub tol_hit: f64,
    pub tail_tol: f64,
    /// Truncation horizon for flows and hitting-time searches.
    pub horizon: f64,
    pub grid_n: usize,
    pub k_seg: usize,
    pub seg_len: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_schedule: Vec<f64>,
    /// Lattice points per axis used when checking declared bounds.
    pub bound_samples: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            dt_flow: 1e-2,
            tol_hit: 1e-10,
            tail_tol: 1e-8,
            horizon: 50.0,
            grid_n: 100,
            k_seg: 1,
            seg_len: 0.25,
            tol: 1e-8,
            max_iter: 5000,
            nu_min: 1e-3,
            nu_max: 64.0,
            n_schedule: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            bound_samples: 41,
        }
    }
}

impl Numerics {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("dt_flow", self.dt_flow),
            ("tol_hit", self.tol_hit),
            ("tail_tol", self.tail_tol),
            ("horizon", self.horizon),
            ("seg_len", self.seg_len),
            ("tol", self.tol),
            ("nu_min", self.nu_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if self.tail_tol >= 1.0 {
            return Err(Error::Config("tail_tol must be below 1".into()));
        }
        if self.grid_n < 8 {
            return Err(Error::Config("grid_n must be at least 8".into()));
        }
        if self.k_seg == 0 || self.max_iter == 0 {
            return Err(Error::Config("k_seg and max_iter must be at least 1".into()));
        }
        if !(self.nu_max >= self.nu_min && self.nu_max.is_finite()) {
            return Err(Error::Config("nu_max must be finite and at least nu_min".into()));
        }
        if self.n_schedule.is_empty()
            || self.n_schedule[0] < 1.0
            || self.n_schedule.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("n_schedule must be strictly increasing and start at n >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub t_max: f64,
    pub max_events: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { n_paths: 10_000, seed: 20240531, t_max: 50.0, max_events: 100_000 }
    }
}

impl McConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Config("n_paths must be at least 2".into()));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Config("t_max must be positive and finite".into()));
        }
        if self.max_events == 0 {
            return Err(Error::Config("max_events must be positive".into()));
        }
        Ok(())
    }
}

/// One `(nu, T)` configuration of the change-of-measure suite; the multipliers are
/// constant across cells unless `cells` lists per-cell overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GirsanovCase {
    pub nu0: f64,
    pub nu_gamma: f64,
    pub horizon: f64,
    #[serde(default)]
    pub nu0_cells: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: PathBuf,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Policy file consumed by `evaluate`.
    #[serde(default)]
    pub policy: Option<PathBuf>,
    /// Start points for `simulate`, `evaluate` and the dual spot checks.
    #[serde(default)]
    pub starts: Vec<Vec<f64>>,
    #[serde(default)]
    pub girsanov: Vec<GirsanovCase>,
}

impl RunConfig {
    /// Reads a TOML config; relative paths are resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.model);
        if let Some(p) = cfg.policy.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.out.as_mut() {
            rebase(p);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        self.numerics.check()?;
        self.mc.check()?;
        for case in &self.girsanov {
            let all = std::iter::once(case.nu0).chain([case.nu_gamma]).chain(case.nu0_cells.iter().copied());
            for v in all {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config("girsanov multipliers must be positive".into()));
                }
            }
            if !(case.horizon > 0.0 && case.horizon.is_finite()) {
                return Err(Error::Config("girsanov horizon must be positive".into()));
            }
        }
        Ok(())
    }
}
