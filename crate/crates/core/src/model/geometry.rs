use serde::{Deserialize, Serialize};

use super::point::{Point, MAX_DIM};
use crate::error::{Error, Result};

/// Rectangular partition of the box used to key kernels, policies and intensity controls.
///
/// Each axis is split at its interior breakpoints; cells are numbered row-major with the
/// last axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct CellPartition {
    #[serde(default)]
    pub breaks: Vec<Vec<f64>>,
}

impl CellPartition {
    pub fn uniform_single(dim: usize) -> Self {
        CellPartition { breaks: vec![Vec::new(); dim] }
    }

    fn axis_breaks(&self, axis: usize) -> &[f64] {
        self.breaks.get(axis).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn cells_per_axis(&self, dim: usize) -> Vec<usize> {
        (0..dim).map(|i| self.axis_breaks(i).len() + 1).collect()
    }

    pub fn cell_count(&self, dim: usize) -> usize {
        self.cells_per_axis(dim).iter().product()
    }

    pub fn cell_of(&self, p: &Point) -> usize {
        let mut idx = 0;
        for axis in 0..p.dim() {
            let b = self.axis_breaks(axis);
            let k = b.partition_point(|&v| v <= p[axis]);
            idx = idx * (b.len() + 1) + k;
        }
        idx
    }
}

/// Axis-aligned open box `E = (l_1,u_1) x ... x (l_d,u_d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub boundary_tolerance: f64,
    #[serde(default)]
    pub cells: CellPartition,
}

impl DomainGeometry {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, boundary_tolerance: f64) -> Self {
        let dim = lower.len();
        DomainGeometry { lower, upper, boundary_tolerance, cells: CellPartition::uniform_single(dim) }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn check(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > MAX_DIM || self.upper.len() != d {
            return Err(Error::MalformedModel(format!(
                "geometry needs 1..={MAX_DIM} matching lower/upper bounds"
            )));
        }
        if self.lower.iter().chain(&self.upper).any(|v| !v.is_finite()) {
            return Err(Error::MalformedModel("non-finite bound".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l >= u) {
            return Err(Error::MalformedModel("lower bound must be below upper bound".into()));
        }
        let min_width = self.widths().fold(f64::INFINITY, f64::min);
        if !(self.boundary_tolerance > 0.0 && self.boundary_tolerance < min_width / 10.0) {
            return Err(Error::MalformedModel(format!(
                "boundary_tolerance must lie in (0, {})",
                min_width / 10.0
            )));
        }
        if self.cells.breaks.len() > d {
            return Err(Error::MalformedModel("too many partition axes".into()));
        }
        for (axis, b) in self.cells.breaks.iter().enumerate() {
            let sorted = b.windows(2).all(|w| w[0] < w[1]);
            let inside = b.iter().all(|&v| v > self.lower[axis] && v < self.upper[axis]);
            if !sorted || !inside {
                return Err(Error::MalformedModel(format!(
                    "partition breaks on axis {axis} must be increasing and interior"
                )));
            }
        }
        Ok(())
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l)
    }

    /// Distance to the nearest face; negative outside the box.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        let mut sd = f64::INFINITY;
        for i in 0..self.dim() {
            sd = sd.min(p[i] - self.lower[i]).min(self.upper[i] - p[i]);
        }
        sd
    }

    pub fn on_boundary(&self, p: &Point) -> bool {
        self.signed_distance(p) <= self.boundary_tolerance
    }

    pub fn is_interior(&self, p: &Point) -> bool {
        !self.on_boundary(p)
    }

    pub fn clip(&self, p: &Point) -> Point {
        let mut out = *p;
        for i in 0..self.dim() {
            out[i] = out[i].clamp(self.lower[i], self.upper[i]);
        }
        out
    }

    /// Clips onto the closed box and moves every coordinate within the boundary tolerance of
    /// a face onto that face.
    pub fn snap(&self, p: &Point) -> Point {
        let mut out = self.clip(p);
        for i in 0..self.dim() {
            if out[i] - self.lower[i] <= self.boundary_tolerance {
                out[i] = self.lower[i];
            } else if self.upper[i] - out[i] <= self.boundary_tolerance {
                out[i] = self.upper[i];
            }
        }
        out
    }

    /// Outward unit normal of the face closest to `p`.
    pub fn outward_normal(&self, p: &Point) -> Point {
        let mut best = (f64::INFINITY, 0usize, 1.0);
        for i in 0..self.dim() {
            let lo = p[i] - self.lower[i];
            let hi = self.upper[i] - p[i];
            if lo < best.0 {
                best = (lo, i, -1.0);
            }
            if hi < best.0 {
                best = (hi, i, 1.0);
            }
        }
        let mut n = Point::zeros(self.dim());
        n[best.1] = best.2;
        n
    }

    pub fn cell_of(&self, p: &Point) -> usize {
        self.cells.cell_of(p)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.cell_count(self.dim())
    }

    /// Smallest extent of any partition cell along any axis.
    pub fn min_cell_width(&self) -> f64 {
        let mut w = f64::INFINITY;
        for axis in 0..self.dim() {
            let mut edges = vec![self.lower[axis]];
            edges.extend(self.cells.breaks.get(axis).into_iter().flatten().copied());
            edges.push(self.upper[axis]);
            for e in edges.windows(2) {
                w = w.min(e[1] - e[0]);
            }
        }
        w
    }

    /// Regular lattice of `n` points per axis covering the closed box, row-major.
    pub fn sample_lattice(&self, n: usize) -> Vec<Point> {
        let n = n.max(2);
        let d = self.dim();
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut k| {
                let mut p = Point::zeros(d);
                for axis in (0..d).rev() {
                    let j = k % n;
                    k /= n;
                    let t = j as f64 / (n - 1) as f64;
                    p[axis] = self.lower[axis] + t * (self.upper[axis] - self.lower[axis]);
                }
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_lookup_row_major() {
        let mut g = DomainGeometry::new(vec![0.0, 0.0], vec![1.0, 1.0], 1e-9);
        g.cells.breaks = vec![vec![0.5], vec![0.25, 0.75]];
        assert_eq!(g.cell_count(), 6);
        assert_eq!(g.cell_of(&Point::from_slice(&[0.1, 0.1])), 0);
        assert_eq!(g.cell_of(&Point::from_slice(&[0.1, 0.5])), 1);
        assert_eq!(g.cell_of(&Point::from_slice(&[0.6, 0.9])), 5);
        assert_eq!(g.min_cell_width(), 0.25);
    }

    #[test]
    fn signed_distance_and_normal() {
        let g = DomainGeometry::new(vec![0.0], vec![1.0], 1e-9);
        assert!((g.signed_distance(&Point::from_slice(&[0.3])) - 0.3).abs() < 1e-15);
        assert!(g.signed_distance(&Point::from_slice(&[1.2])) < 0.0);
        assert_eq!(g.outward_normal(&Point::from_slice(&[0.9]))[0], 1.0);
        assert!(g.on_boundary(&Point::from_slice(&[1.0])));
    }

    #[test]
    fn tolerance_must_be_small() {
        let g = DomainGeometry::new(vec![0.0], vec![1.0], 0.2);
        assert!(g.check().is_err());
    }
}
