//! Declarative scalar function families used for the drift, jump rate and costs.

use serde::{Deserialize, Serialize};

use super::point::Point;
use crate::error::{Error, Result};

/// One monomial `coeff * x_1^p_1 * ... * x_d^p_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant { value: f64 },
    /// `offset + coeffs . x`
    Affine { offset: f64, coeffs: Vec<f64> },
    /// Sum of monomials of total degree at most 3.
    Polynomial { terms: Vec<Monomial> },
    /// Values on a tensor grid, multilinear in between and clamped outside.
    Tabulated { axes: Vec<Vec<f64>>, values: Vec<f64> },
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::MalformedModel(m.to_string()));
        match self {
            ScalarFn::Constant { value } if !value.is_finite() => bad("non-finite constant"),
            ScalarFn::Affine { offset, coeffs } => {
                if coeffs.len() != dim {
                    return bad("affine coefficient count must equal the dimension");
                }
                if !offset.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
                    return bad("non-finite affine coefficient");
                }
                Ok(())
            }
            ScalarFn::Polynomial { terms } => {
                for t in terms {
                    if t.powers.len() != dim {
                        return bad("monomial powers must have one entry per axis");
                    }
                    if t.powers.iter().sum::<u32>() > 3 {
                        return bad("polynomial degree above 3");
                    }
                    if !t.coeff.is_finite() {
                        return bad("non-finite polynomial coefficient");
                    }
                }
                Ok(())
            }
            ScalarFn::Tabulated { axes, values } => {
                if axes.len() != dim {
                    return bad("tabulated function needs one axis per dimension");
                }
                if axes.iter().any(|a| a.len() < 2 || a.windows(2).any(|w| w[0] >= w[1])) {
                    return bad("tabulated axes need at least two increasing nodes");
                }
                let expected: usize = axes.iter().map(Vec::len).product();
                if values.len() != expected {
                    return bad("tabulated value count does not match the axes");
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("non-finite tabulated value");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Affine { offset, coeffs } => {
                offset + coeffs.iter().zip(x.as_slice()).map(|(c, v)| c * v).sum::<f64>()
            }
            ScalarFn::Polynomial { terms } => terms
                .iter()
                .map(|t| {
                    t.powers
                        .iter()
                        .zip(x.as_slice())
                        .fold(t.coeff, |acc, (&p, &v)| acc * v.powi(p as i32))
                })
                .sum(),
            ScalarFn::Tabulated { axes, values } => multilinear(axes, values, x),
        }
    }
}

fn multilinear(axes: &[Vec<f64>], values: &[f64], x: &Point) -> f64 {
    let d = axes.len();
    let mut base = [0usize; super::point::MAX_DIM];
    let mut frac = [0.0f64; super::point::MAX_DIM];
    for (i, ax) in axes.iter().enumerate() {
        let v = x[i].clamp(ax[0], ax[ax.len() - 1]);
        let k = ax.partition_point(|&a| a <= v).clamp(1, ax.len() - 1) - 1;
        base[i] = k;
        frac[i] = (v - ax[k]) / (ax[k + 1] - ax[k]);
    }
    let mut total = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = 0;
        for i in 0..d {
            let up = (corner >> (d - 1 - i)) & 1;
            w *= if up == 1 { frac[i] } else { 1.0 - frac[i] };
            idx = idx * axes[i].len() + base[i] + up;
        }
        if w != 0.0 {
            total += w * values[idx];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(xs: &[f64]) -> Point {
        Point::from_slice(xs)
    }

    #[test]
    fn families_evaluate() {
        let a = ScalarFn::Affine { offset: 1.0, coeffs: vec![2.0, -1.0] };
        assert_eq!(a.eval(&p(&[0.5, 1.0])), 1.0);
        let poly = ScalarFn::Polynomial {
            terms: vec![
                Monomial { coeff: 1.0, powers: vec![0, 0] },
                Monomial { coeff: 3.0, powers: vec![2, 1] },
            ],
        };
        assert_eq!(poly.eval(&p(&[2.0, 0.5])), 7.0);
        assert!(ScalarFn::Polynomial { terms: vec![Monomial { coeff: 1.0, powers: vec![4, 0] }] }
            .check(2)
            .is_err());
    }

    #[test]
    fn tabulated_is_multilinear() {
        let t = ScalarFn::Tabulated {
            axes: vec![vec![0.0, 1.0], vec![0.0, 2.0]],
            values: vec![0.0, 2.0, 1.0, 3.0],
        };
        t.check(2).unwrap();
        // f = x + y exactly on this table
        assert!((t.eval(&p(&[0.25, 0.5])) - 0.75).abs() < 1e-14);
        assert!((t.eval(&p(&[1.0, 2.0])) - 3.0).abs() < 1e-14);
        // clamped outside
        assert!((t.eval(&p(&[2.0, 2.0])) - 3.0).abs() < 1e-14);
    }
}
