//! Tensor-product Chebyshev grid on a square box of the meridional
//! half-plane, in coordinates `(r, z)` offset so that the physical radius is
//! `r + ℓ`.

use super::cheb;
use crate::error::{Error, Result};
use faer::Mat;

/// Which measure the quadrature weights carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    /// `dr dz`.
    Planar,
    /// `2π (r + ℓ) dr dz`, the three-dimensional volume element of an
    /// axisymmetric field.
    Cylindrical,
}

#[derive(Debug, Clone)]
pub struct MeridionalGrid {
    /// Distance of the box centre from the symmetry axis; `None` is the planar
    /// limit `ℓ = ∞`.
    pub ell: Option<f64>,
    pub half_width: f64,
    pub nr: usize,
    pub nz: usize,
    /// Full node sets including the box edges.
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub dr: Mat<f64>,
    pub dz: Mat<f64>,
    pub wr: Vec<f64>,
    pub wz: Vec<f64>,
}

/// Strength of the Kosloff-Tal-Ezer stretching toward uniform spacing.
pub const DEFAULT_STRETCH: f64 = 0.9;

fn mapped_nodes(n: usize, half_width: f64, alpha: f64) -> (Vec<f64>, Mat<f64>, Vec<f64>) {
    let s = cheb::lobatto(n);
    let asa = alpha.asin();
    let x: Vec<f64> = s.iter().map(|&s| half_width * (alpha * s).asin() / asa).collect();
    let jac: Vec<f64> = s
        .iter()
        .map(|&s| half_width * alpha / (asa * (1.0 - alpha * alpha * s * s).sqrt()))
        .collect();
    let ds = cheb::diff_matrix(&s);
    let d = Mat::<f64>::from_fn(n, n, |i, j| ds[(i, j)] / jac[i]);
    let ws = cheb::interval_weights(&s);
    let w = ws.iter().zip(&jac).map(|(w, j)| w * j).collect();
    (x, d, w)
}

impl MeridionalGrid {
    pub fn new(n: usize, half_width: f64, ell: Option<f64>) -> Result<Self> {
        Self::with_stretch(n, n, half_width, ell, DEFAULT_STRETCH)
    }

    pub fn with_stretch(nr: usize, nz: usize, half_width: f64, ell: Option<f64>, alpha: f64) -> Result<Self> {
        if nr < 6 || nz < 6 {
            return Err(Error::invalid(format!("meridional grid needs at least 6 nodes per direction, got {nr}x{nz}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!("box half-width must be positive, got {half_width}")));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::invalid(format!("stretch parameter must lie in [0, 1), got {alpha}")));
        }
        if let Some(l) = ell {
            if !(l.is_finite() && l >= half_width) {
                return Err(Error::invalid(format!(
                    "box [-{half_width}, {half_width}] crosses the symmetry axis at offset ell = {l}"
                )));
            }
        }
        let alpha = if alpha == 0.0 { 1e-8 } else { alpha };
        let (r, dr, wr) = mapped_nodes(nr, half_width, alpha);
        let (z, dz, wz) = mapped_nodes(nz, half_width, alpha);
        Ok(Self { ell, half_width, nr, nz, r, z, dr, dz, wr, wz })
    }

    pub fn n_full(&self) -> usize {
        self.nr * self.nz
    }

    pub fn n_int(&self) -> usize {
        (self.nr - 2) * (self.nz - 2)
    }

    #[inline]
    pub fn full_index(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    #[inline]
    pub fn int_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.nz - 2) + (j - 1)
    }

    /// Physical distance from the axis at offset `r` (or `1` in the planar
    /// limit, where it never enters).
    #[inline]
    pub fn radius(&self, r: f64) -> f64 {
        match self.ell {
            Some(l) => r + l,
            None => 1.0,
        }
    }

    /// `1 / (r + ℓ)`, zero in the planar limit.
    #[inline]
    pub fn inv_radius(&self, r: f64) -> f64 {
        match self.ell {
            Some(l) => 1.0 / (r + l),
            None => 0.0,
        }
    }

    /// Interior node coordinates in unknown ordering.
    pub fn interior_points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_int());
        for i in 1..self.nr - 1 {
            for j in 1..self.nz - 1 {
                out.push((self.r[i], self.z[j]));
            }
        }
        out
    }

    pub fn full_points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_full());
        for i in 0..self.nr {
            for j in 0..self.nz {
                out.push((self.r[i], self.z[j]));
            }
        }
        out
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nr - 1 || j == self.nz - 1
    }

    pub fn full_weights(&self, measure: Measure) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n_full());
        for i in 0..self.nr {
            let m = match measure {
                Measure::Planar => 1.0,
                Measure::Cylindrical => 2.0 * std::f64::consts::PI * self.radius(self.r[i]),
            };
            for j in 0..self.nz {
                w.push(self.wr[i] * self.wz[j] * m);
            }
        }
        w
    }

    pub fn interior_weights(&self, measure: Measure) -> Vec<f64> {
        self.restrict(&self.full_weights(measure))
    }

    pub fn sample_interior<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.interior_points().into_iter().map(|(r, z)| f(r, z)).collect()
    }

    pub fn sample_full<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.full_points().into_iter().map(|(r, z)| f(r, z)).collect()
    }

    /// Zero-extend interior values to the full grid.
    pub fn embed<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.n_full()];
        for i in 1..self.nr - 1 {
            for j in 1..self.nz - 1 {
                out[self.full_index(i, j)] = v[self.int_index(i, j)];
            }
        }
        out
    }

    pub fn restrict<T: Copy>(&self, v: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_int());
        for i in 1..self.nr - 1 {
            for j in 1..self.nz - 1 {
                out.push(v[self.full_index(i, j)]);
            }
        }
        out
    }

    /// `∂_r` of a full-grid field, at every node.
    pub fn d_r(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full()];
        for i in 0..self.nr {
            for k in 0..self.nr {
                let c = self.dr[(i, k)];
                if c == 0.0 {
                    continue;
                }
                for j in 0..self.nz {
                    out[i * self.nz + j] += c * f[k * self.nz + j];
                }
            }
        }
        out
    }

    /// `∂_z` of a full-grid field, at every node.
    pub fn d_z(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full()];
        for i in 0..self.nr {
            let row = &f[i * self.nz..(i + 1) * self.nz];
            for j in 0..self.nz {
                let mut acc = 0.0;
                for (k, v) in row.iter().enumerate() {
                    acc += self.dz[(j, k)] * v;
                }
                out[i * self.nz + j] = acc;
            }
        }
        out
    }

    /// Matrix of `∂_r` mapping interior unknowns (zero boundary values) to
    /// derivative values at all nodes.
    pub fn d_r_full_from_int(&self) -> Mat<f64> {
        let nzi = self.nz - 2;
        Mat::from_fn(self.n_full(), self.n_int(), |row, col| {
            let (i, j) = (row / self.nz, row % self.nz);
            let (ki, kj) = (col / nzi + 1, col % nzi + 1);
            if j == kj {
                self.dr[(i, ki)]
            } else {
                0.0
            }
        })
    }

    pub fn d_z_full_from_int(&self) -> Mat<f64> {
        let nzi = self.nz - 2;
        Mat::from_fn(self.n_full(), self.n_int(), |row, col| {
            let (i, j) = (row / self.nz, row % self.nz);
            let (ki, kj) = (col / nzi + 1, col % nzi + 1);
            if i == ki {
                self.dz[(j, kj)]
            } else {
                0.0
            }
        })
    }

    /// Weighted `L²` norm of a full-grid field.
    pub fn l2_full(&self, f: &[f64], measure: Measure) -> f64 {
        let w = self.full_weights(measure);
        f.iter().zip(&w).map(|(f, w)| w * f * f).sum::<f64>().sqrt()
    }

    /// Discrete `H^k` norm: the sum over `a + b ≤ k` of the squared weighted
    /// `L²` norms of `∂_r^a ∂_z^b f`.
    pub fn sobolev_full(&self, f: &[f64], k: usize, measure: Measure) -> f64 {
        let w = self.full_weights(measure);
        let mut total = 0.0;
        let mut row = f.to_vec();
        for a in 0..=k {
            let mut g = row.clone();
            for b in 0..=(k - a) {
                total += g.iter().zip(&w).map(|(g, w)| w * g * g).sum::<f64>();
                if b < k - a {
                    g = self.d_z(&g);
                }
            }
            if a < k {
                row = self.d_r(&row);
            }
        }
        total.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_must_stay_off_axis() {
        assert!(MeridionalGrid::new(12, 3.0, Some(2.0)).is_err());
        assert!(MeridionalGrid::new(12, 3.0, Some(3.0)).is_ok());
        assert!(MeridionalGrid::new(4, 3.0, None).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let g = MeridionalGrid::new(48, 6.0, None).unwrap();
        let f = g.sample_full(|r, z| (-(r * r + z * z)).exp());
        let w = g.full_weights(Measure::Planar);
        let q: f64 = f.iter().zip(&w).map(|(f, w)| f * w).sum();
        assert!((q - std::f64::consts::PI).abs() < 1e-9);
        let dr = g.d_r(&f);
        let pts = g.full_points();
        let err = dr
            .iter()
            .zip(&pts)
            .map(|(d, (r, z))| (d + 2.0 * r * (-(r * r + z * z)).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn sobolev_norm_is_monotone_in_order() {
        let g = MeridionalGrid::new(24, 5.0, Some(10.0)).unwrap();
        let f = g.sample_full(|r, z| (-(r * r + 2.0 * z * z)).exp() * (1.0 + r));
        let n0 = g.sobolev_full(&f, 0, Measure::Cylindrical);
        assert!((n0 - g.l2_full(&f, Measure::Cylindrical)).abs() < 1e-12 * n0);
        let n1 = g.sobolev_full(&f, 1, Measure::Cylindrical);
        let n2 = g.sobolev_full(&f, 2, Measure::Cylindrical);
        assert!(n0 <= n1 && n1 <= n2);
    }
}
