//! Mapped Chebyshev grid on `(0, rho_max]` for radial mode problems.

use super::cheb;
use crate::error::{Error, Result};
use faer::Mat;
use serde::{Deserialize, Serialize};

/// Core scale of the geometric map: nodes cluster on `rho ≲ GEOMETRIC_CORE`
/// and spread logarithmically beyond it.
pub const GEOMETRIC_CORE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mapping {
    /// Affine map `rho = rho_max (1 + s) / 2`; polynomials in `rho` are
    /// differentiated exactly.
    Algebraic,
    /// Exponential clustering `rho = c (exp(kappa (1 + s) / 2) - 1)`.
    Geometric,
}

impl std::str::FromStr for Mapping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebraic" => Ok(Mapping::Algebraic),
            "geometric" => Ok(Mapping::Geometric),
            other => Err(Error::invalid(format!("unknown radial mapping '{other}'"))),
        }
    }
}

/// Radau-type grid: the outer endpoint `rho_max` is a node, the origin is not.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub rho_max: f64,
    pub mapping: Mapping,
    pub rho: Vec<f64>,
    pub s: Vec<f64>,
    /// `d rho / d s` at the nodes.
    pub jac: Vec<f64>,
    /// First and second derivative matrices in `rho`.
    pub d1: Mat<f64>,
    pub d2: Mat<f64>,
    /// Weights for `∫_0^{rho_max} h(rho) rho d rho`.
    pub w_area: Vec<f64>,
    /// Weights for `∫_0^{rho_max} h(rho) d rho`.
    pub w_line: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize, rho_max: f64, mapping: Mapping) -> Result<Self> {
        if n < 8 {
            return Err(Error::invalid(format!("radial grid needs at least 8 nodes, got {n}")));
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::invalid(format!("rho_max must be positive, got {rho_max}")));
        }
        let s = cheb::radau_right(n);
        let (rho, jac): (Vec<f64>, Vec<f64>) = match mapping {
            Mapping::Algebraic => s
                .iter()
                .map(|&s| (0.5 * rho_max * (1.0 + s), 0.5 * rho_max))
                .unzip(),
            Mapping::Geometric => {
                let c = GEOMETRIC_CORE;
                let kappa = (1.0 + rho_max / c).ln();
                s.iter()
                    .map(|&s| {
                        let e = (0.5 * kappa * (1.0 + s)).exp();
                        (c * (e - 1.0), 0.5 * kappa * c * e)
                    })
                    .unzip()
            }
        };
        let ds = cheb::diff_matrix(&s);
        let d1 = Mat::<f64>::from_fn(n, n, |i, j| ds[(i, j)] / jac[i]);
        let d2 = &d1 * &d1;
        let ws = cheb::interval_weights(&s);
        let w_line: Vec<f64> = ws.iter().zip(&jac).map(|(w, j)| w * j).collect();
        let w_area = w_line.iter().zip(&rho).map(|(w, r)| w * r).collect();
        let mut rho = rho;
        // Guard the endpoint against rounding in the map.
        rho[n - 1] = rho_max;
        Ok(Self { rho_max, mapping, rho, s, jac, d1, d2, w_area, w_line })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// `∫_0^{rho_max} h rho d rho` for nodal values `h`.
    pub fn quad(&self, h: &[f64]) -> f64 {
        h.iter().zip(&self.w_area).map(|(h, w)| h * w).sum()
    }

    /// Apply the first-derivative matrix.
    pub fn diff(&self, f: &[f64]) -> Vec<f64> {
        matvec(&self.d1, f)
    }

    /// Number of nodes inside the closed interval `[a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.rho.iter().filter(|&&r| r >= a && r <= b).count()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.rho.iter().map(|&r| f(r)).collect()
    }
}

pub(crate) fn matvec(m: &Mat<f64>, f: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * f[j]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(RadialGrid::new(4, 10.0, Mapping::Algebraic).is_err());
        assert!(RadialGrid::new(32, -1.0, Mapping::Geometric).is_err());
        assert!(RadialGrid::new(32, f64::NAN, Mapping::Geometric).is_err());
    }

    #[test]
    fn nodes_exclude_origin_and_end_at_rho_max() {
        for m in [Mapping::Algebraic, Mapping::Geometric] {
            let g = RadialGrid::new(40, 12.0, m).unwrap();
            assert!(g.rho[0] > 0.0);
            assert_eq!(*g.rho.last().unwrap(), 12.0);
            assert!(g.rho.windows(2).all(|p| p[0] < p[1]));
        }
    }
}
