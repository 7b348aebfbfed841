//! Common interface of the two-dimensional meridional discretisations.
//!
//! A grid has a set of nodes carrying quadrature weights, of which a subset
//! are unknowns (the rest hold homogeneous boundary values). Coordinates are
//! `(x, z)` with `x = r′ − ℓ` the offset radial coordinate.

use super::meridional::{Measure, MeridionalGrid};
use faer::Mat;
use std::f64::consts::PI;

pub trait FieldGrid {
    /// Offset of the grid origin from the symmetry axis; `None` in the planar
    /// limit.
    fn ell(&self) -> Option<f64>;
    fn nodes(&self) -> Vec<(f64, f64)>;
    /// Node index of each unknown.
    fn unknown_nodes(&self) -> Vec<usize>;
    /// Weights for `∫ h dx dz` at the nodes.
    fn planar_weights(&self) -> Vec<f64>;
    /// `∂_x` and `∂_z` of a field given at every node.
    fn dx(&self, f: &[f64]) -> Vec<f64>;
    fn dz(&self, f: &[f64]) -> Vec<f64>;
    /// Gradient matrices from unknowns to all nodes.
    fn grad_matrices(&self) -> (Mat<f64>, Mat<f64>);

    fn n_nodes(&self) -> usize {
        self.planar_weights().len()
    }

    fn n_unknowns(&self) -> usize {
        self.unknown_nodes().len()
    }

    /// Distance from the axis, `1` in the planar limit.
    fn radius(&self, x: f64) -> f64 {
        match self.ell() {
            Some(l) => l + x,
            None => 1.0,
        }
    }

    /// `1 / (x + ℓ)`, zero in the planar limit.
    fn inv_radius(&self, x: f64) -> f64 {
        match self.ell() {
            Some(l) => 1.0 / (l + x),
            None => 0.0,
        }
    }

    fn weights(&self, measure: Measure) -> Vec<f64> {
        let w = self.planar_weights();
        match measure {
            Measure::Planar => w,
            Measure::Cylindrical => self
                .nodes()
                .iter()
                .zip(&w)
                .map(|((x, _), w)| w * 2.0 * PI * self.radius(*x))
                .collect(),
        }
    }

    fn unknown_weights(&self, measure: Measure) -> Vec<f64> {
        self.restrict(&self.weights(measure))
    }

    fn embed(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (k, &i) in self.unknown_nodes().iter().enumerate() {
            out[i] = v[k];
        }
        out
    }

    fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.unknown_nodes().iter().map(|&i| v[i]).collect()
    }

    fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes().into_iter().map(|(x, z)| f(x, z)).collect()
    }

    fn l2(&self, f: &[f64], measure: Measure) -> f64 {
        let w = self.weights(measure);
        f.iter().zip(&w).map(|(f, w)| w * f * f).sum::<f64>().sqrt()
    }

    /// `H^k` norm: square root of the sum over `a + b ≤ k` of squared `L²`
    /// norms of `∂_x^a ∂_z^b f`.
    fn sobolev(&self, f: &[f64], k: usize, measure: Measure) -> f64 {
        let w = self.weights(measure);
        let mut total = 0.0;
        let mut row = f.to_vec();
        for a in 0..=k {
            let mut g = row.clone();
            for b in 0..=(k - a) {
                total += g.iter().zip(&w).map(|(g, w)| w * g * g).sum::<f64>();
                if b < k - a {
                    g = self.dz(&g);
                }
            }
            if a < k {
                row = self.dx(&row);
            }
        }
        total.sqrt()
    }
}

impl FieldGrid for MeridionalGrid {
    fn ell(&self) -> Option<f64> {
        self.ell
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        self.full_points()
    }

    fn unknown_nodes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_int());
        for i in 1..self.nr - 1 {
            for j in 1..self.nz - 1 {
                out.push(self.full_index(i, j));
            }
        }
        out
    }

    fn planar_weights(&self) -> Vec<f64> {
        self.full_weights(Measure::Planar)
    }

    fn dx(&self, f: &[f64]) -> Vec<f64> {
        self.d_r(f)
    }

    fn dz(&self, f: &[f64]) -> Vec<f64> {
        self.d_z(f)
    }

    fn grad_matrices(&self) -> (Mat<f64>, Mat<f64>) {
        (self.d_r_full_from_int(), self.d_z_full_from_int())
    }
}
