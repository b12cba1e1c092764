use serde::Serialize;

use crate::model::{DomainGeometry, Point, MAX_DIM};

const MAX_CORNERS: usize = 1 << MAX_DIM;

/// Uniform lattice with `n` intervals per axis over the closed box, nodes numbered row-major
/// with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: usize,
    #[serde(skip)]
    spacing: Vec<f64>,
    #[serde(skip)]
    interior: Vec<bool>,
}

/// Multilinear interpolation weights of one point.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub idx: [usize; MAX_CORNERS],
    pub w: [f64; MAX_CORNERS],
    pub len: u8,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len as usize {
            s += self.w[k] * values[self.idx[k]];
        }
        s
    }
}

impl Grid {
    pub fn new(geom: &DomainGeometry, n: usize) -> Grid {
        let d = geom.dim();
        let spacing: Vec<f64> = (0..d).map(|i| (geom.upper[i] - geom.lower[i]) / n as f64).collect();
        let mut g = Grid { lower: geom.lower.clone(), upper: geom.upper.clone(), n, spacing, interior: Vec::new() };
        g.interior = (0..g.node_count()).map(|k| geom.is_interior(&g.node(k))).collect();
        g
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim() as u32)
    }

    pub fn multi_index(&self, mut k: usize) -> [usize; MAX_DIM] {
        let m = self.nodes_per_axis();
        let mut out = [0; MAX_DIM];
        for axis in (0..self.dim()).rev() {
            out[axis] = k % m;
            k /= m;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let m = self.nodes_per_axis();
        multi[..self.dim()].iter().fold(0, |acc, &j| acc * m + j)
    }

    pub fn node(&self, k: usize) -> Point {
        let mi = self.multi_index(k);
        let mut p = Point::zeros(self.dim());
        for axis in 0..self.dim() {
            p[axis] = if mi[axis] == self.n {
                self.upper[axis]
            } else {
                self.lower[axis] + mi[axis] as f64 * self.spacing[axis]
            };
        }
        p
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.interior[k]
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&k| self.interior[k])
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&k| !self.interior[k])
    }

    /// Neighbour of node `k` one step along `axis` (`dir` = +1 or -1), if inside the lattice.
    pub fn neighbour(&self, k: usize, axis: usize, dir: isize) -> Option<usize> {
        let mut mi = self.multi_index(k);
        let j = mi[axis] as isize + dir;
        if j < 0 || j > self.n as isize {
            return None;
        }
        mi[axis] = j as usize;
        Some(self.flat_index(&mi))
    }

    /// Interpolation stencil; points outside the box are clamped onto it.
    pub fn stencil(&self, p: &Point) -> Stencil {
        let d = self.dim();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for axis in 0..d {
            let s = ((p[axis] - self.lower[axis]) / self.spacing[axis]).clamp(0.0, self.n as f64);
            let k = (s.floor() as usize).min(self.n - 1);
            base[axis] = k;
            frac[axis] = s - k as f64;
        }
        let mut st = Stencil { idx: [0; MAX_CORNERS], w: [0.0; MAX_CORNERS], len: 0 };
        let mut corner_idx = [0usize; MAX_DIM];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for axis in 0..d {
                let up = (corner >> (d - 1 - axis)) & 1;
                corner_idx[axis] = base[axis] + up;
                w *= if up == 1 { frac[axis] } else { 1.0 - frac[axis] };
            }
            if w != 0.0 {
                let l = st.len as usize;
                st.idx[l] = self.flat_index(&corner_idx);
                st.w[l] = w;
                st.len += 1;
            }
        }
        if st.len == 0 {
            st.idx[0] = self.flat_index(&base);
            st.w[0] = 1.0;
            st.len = 1;
        }
        st
    }

    /// Partition of the box into the nearest-node cells of the lattice, indexed like the nodes.
    pub fn node_cells(&self) -> crate::model::CellPartition {
        crate::model::CellPartition {
            breaks: (0..self.dim())
                .map(|axis| (0..self.n).map(|k| self.lower[axis] + (k as f64 + 0.5) * self.spacing[axis]).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum Space {
    Primal,
    /// Values per `(a0, aGamma)` pair, pair index `a0 * n_boundary + aGamma`.
    Dual { n_interior: usize, n_boundary: usize },
}

impl Space {
    pub fn pairs(&self) -> usize {
        match self {
            Space::Primal => 1,
            Space::Dual { n_interior, n_boundary } => n_interior * n_boundary,
        }
    }
}

/// Grid function; for dual fields the values of pair `p` occupy `values[p*nodes..(p+1)*nodes]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub grid: Grid,
    pub space: Space,
    pub values: Vec<f64>,
}

impl ValueField {
    pub fn constant(grid: Grid, space: Space, v: f64) -> ValueField {
        let n = grid.node_count() * space.pairs();
        ValueField { grid, space, values: vec![v; n] }
    }

    pub fn pair_values(&self, pair: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.values[pair * n..(pair + 1) * n]
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.eval_pair(p, 0)
    }

    pub fn eval_pair(&self, p: &Point, pair: usize) -> f64 {
        self.grid.stencil(p).apply(self.pair_values(pair))
    }

    pub fn at(&self, node: usize, pair: usize) -> f64 {
        self.values[pair * self.grid.node_count() + node]
    }

    pub fn sup_diff(&self, other: &ValueField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest difference over interior nodes only.
    pub fn sup_diff_interior(&self, other: &ValueField) -> f64 {
        let mut m: f64 = 0.0;
        for pair in 0..self.space.pairs() {
            for k in self.grid.interior_nodes() {
                m = m.max((self.at(k, pair) - other.at(k, pair)).abs());
            }
        }
        m
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max over pairs minus min over pairs at `node`.
    pub fn pair_spread(&self, node: usize) -> f64 {
        let vals = (0..self.space.pairs()).map(|p| self.at(node, p));
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// CSV rows `x1..xd[,a0,aGamma],value` using the given action labels.
    pub fn csv(&self, interior: &[String], boundary: &[String]) -> (String, Vec<String>) {
        let d = self.grid.dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        if let Space::Dual { .. } = self.space {
            header.push("a0".into());
            header.push("aGamma".into());
        }
        header.push("value".into());
        let mut rows = Vec::with_capacity(self.values.len());
        for pair in 0..self.space.pairs() {
            for k in 0..self.grid.node_count() {
                let p = self.grid.node(k);
                let mut cols: Vec<String> = p.as_slice().iter().map(|v| format!("{v}")).collect();
                if let Space::Dual { n_boundary, .. } = self.space {
                    cols.push(interior[pair / n_boundary].clone());
                    cols.push(boundary[pair % n_boundary].clone());
                }
                cols.push(format!("{}", self.at(k, pair)));
                rows.push(cols.join(","));
            }
        }
        (header.join(","), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let geom = DomainGeometry::new(vec![0.0, -1.0], vec![2.0, 1.0], 1e-9);
        let g = Grid::new(&geom, 8);
        let f = |p: &Point| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let vals: Vec<f64> = (0..g.node_count()).map(|k| f(&g.node(k))).collect();
        for p in [[0.3, 0.2], [1.99, -0.99], [2.0, 1.0], [0.0, 0.0]] {
            let p = Point::from_slice(&p);
            assert!((g.stencil(&p).apply(&vals) - f(&p)).abs() < 1e-12);
        }
        assert_eq!(g.node(g.node_count() - 1).as_slice(), &[2.0, 1.0]);
        assert_eq!(g.interior_nodes().count(), 7 * 7);
    }

    #[test]
    fn node_cells_follow_node_numbering() {
        let geom = DomainGeometry::new(vec![0.0, 0.0], vec![1.0, 1.0], 1e-9);
        let g = Grid::new(&geom, 10);
        let cells = g.node_cells();
        for k in [0, 5, 17, 120] {
            assert_eq!(cells.cell_of(&g.node(k)), k);
        }
    }
}
