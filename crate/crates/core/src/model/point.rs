use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

/// Largest supported state dimension.
pub const MAX_DIM: usize = 4;

/// A point of the state space, stored inline so the flow integrator never allocates.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        Point { coords: [0.0; MAX_DIM], dim: dim as u8 }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut p = Point::zeros(xs.len());
        p.coords[..xs.len()].copy_from_slice(xs);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        let d = self.dim();
        &mut self.coords[..d]
    }

    pub fn norm(&self) -> f64 {
        self.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Point) -> Point {
        let mut out = *self;
        for (o, v) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *o += s * v;
        }
        out
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Point {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        self.axpy(-1.0, &rhs)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(mut self, s: f64) -> Point {
        self.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        self
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}
