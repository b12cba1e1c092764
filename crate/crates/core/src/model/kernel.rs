use super::point::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// Finite atom mixture keyed by `(cell, action)`.
///
/// Entries are stored flat under `key = cell * n_actions + action`, the key the solver uses
/// to cache kernel integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteKernel {
    pub n_cells: usize,
    pub n_actions: usize,
    pub table: Vec<Vec<Atom>>,
}

impl DiscreteKernel {
    pub fn key(&self, cell: usize, action: usize) -> usize {
        cell * self.n_actions + action
    }

    pub fn atoms(&self, cell: usize, action: usize) -> &[Atom] {
        &self.table[self.key(cell, action)]
    }

    pub fn by_key(&self, key: usize) -> &[Atom] {
        &self.table[key]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn action_of_key(&self, key: usize) -> usize {
        key % self.n_actions
    }

    /// Sum of weights for each key, for normalization checks.
    pub fn weight_sums(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.table.iter().enumerate().map(|(k, atoms)| (k, atoms.iter().map(|a| a.weight).sum()))
    }

    pub fn all_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.table.iter().flatten()
    }

    /// Kernel integral `sum_i w_i g(y_i)`.
    pub fn integrate(&self, key: usize, mut g: impl FnMut(&Point) -> f64) -> f64 {
        self.table[key].iter().map(|a| a.weight * g(&a.point)).sum()
    }

    /// Atom selected by a uniform draw `u` in [0, 1).
    pub fn sample(&self, key: usize, u: f64) -> Point {
        let atoms = &self.table[key];
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        let mut acc = 0.0;
        let target = u * total;
        for a in atoms {
            acc += a.weight;
            if target < acc {
                return a.point;
            }
        }
        atoms.iter().rev().find(|a| a.weight > 0.0).unwrap_or(&atoms[atoms.len() - 1]).point
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_follows_cumulative_weights() {
        let k = DiscreteKernel {
            n_cells: 1,
            n_actions: 1,
            table: vec![vec![
                Atom { point: Point::from_slice(&[0.1]), weight: 0.25 },
                Atom { point: Point::from_slice(&[0.2]), weight: 0.0 },
                Atom { point: Point::from_slice(&[0.3]), weight: 0.75 },
            ]],
        };
        assert_eq!(k.sample(0, 0.0)[0], 0.1);
        assert_eq!(k.sample(0, 0.2499)[0], 0.1);
        assert_eq!(k.sample(0, 0.25)[0], 0.3);
        assert_eq!(k.sample(0, 0.999999)[0], 0.3);
        assert!((k.integrate(0, |p| p[0]) - 0.25).abs() < 1e-15);
    }
}
