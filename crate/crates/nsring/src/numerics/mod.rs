//! Grids, quadrature, dense eigensolvers and spectral projections.

pub mod cheb;
pub mod field;
pub mod linalg;
pub mod meridional;
pub mod polar;
pub mod quad;
pub mod radial;

pub use linalg::{
    contour_projection, dense_eigs, dense_eigenvalues, shift_invert, weighted_adjoint, weighted_norm,
    ContourOptions, ContourProjection, ContourReport, EigenPair, ShiftInvertOptions,
};
pub use field::FieldGrid;
pub use meridional::{Measure, MeridionalGrid};
pub use polar::PolarGrid;
pub use radial::{Mapping, RadialGrid};

use faer::{c64, Mat};

/// Dense operator together with its labelled additive parts and the
/// diagonal weight of the inner product it acts on.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub total: Mat<c64>,
    pub parts: Vec<(String, Mat<c64>)>,
    pub weights: Vec<f64>,
}

impl OperatorMatrix {
    pub fn from_parts(parts: Vec<(String, Mat<c64>)>, weights: Vec<f64>) -> Self {
        let n = weights.len();
        let mut total = Mat::<c64>::zeros(n, n);
        for (_, p) in &parts {
            total += p;
        }
        Self { total, parts, weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn part(&self, name: &str) -> Option<&Mat<c64>> {
        self.parts.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Largest entrywise deviation of the parts' sum from the total,
    /// relative to the largest entry of the total.
    pub fn parts_sum_gap(&self) -> f64 {
        let n = self.dim();
        let mut gap = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let mut s = c64::new(0.0, 0.0);
                for (_, p) in &self.parts {
                    s += p[(i, j)];
                }
                gap = gap.max((s - self.total[(i, j)]).norm());
                scale = scale.max(self.total[(i, j)].norm());
            }
        }
        gap / scale.max(1e-300)
    }

    /// Operator norm in the weighted space.
    pub fn norm(&self) -> f64 {
        weighted_norm(self.total.as_ref(), &self.weights)
    }

    pub fn part_norm(&self, name: &str) -> Option<f64> {
        self.part(name).map(|m| weighted_norm(m.as_ref(), &self.weights))
    }

    /// `‖X + X*‖ / ‖X‖` for a part `X`, with the adjoint taken in the
    /// weighted space.
    pub fn skew_defect(&self, name: &str) -> Option<f64> {
        let m = self.part(name)?;
        let adj = weighted_adjoint(m.as_ref(), &self.weights);
        let sum = m + &adj;
        let a = weighted_norm(sum.as_ref(), &self.weights);
        let b = weighted_norm(m.as_ref(), &self.weights);
        Some(a / b.max(1e-300))
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        linalg::matvec(self.total.as_ref(), x)
    }

    /// Weighted norm of a vector in the operator's inner product.
    pub fn vec_norm(&self, x: &[c64]) -> f64 {
        x.iter().zip(&self.weights).map(|(x, w)| w * x.norm_sqr()).sum::<f64>().sqrt()
    }
}
