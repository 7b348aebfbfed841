//! Polar grid on a disc of the meridional plane centred at the vortex core:
//! mapped radial nodes times equispaced angles, with Fourier
//! differentiation in the angle.
//!
//! Node `(i, j)` sits at `ϱ_i (cos θ_j, sin θ_j)` with flat index
//! `i * n_theta + j`. The outermost ring is a boundary ring; all other nodes
//! are unknowns, so unknown indices are a prefix of node indices.

use super::field::FieldGrid;
use super::radial::{Mapping, RadialGrid};
use crate::error::{Error, Result};
use faer::Mat;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub ell: Option<f64>,
    pub radial: RadialGrid,
    pub n_theta: usize,
    pub theta: Vec<f64>,
    /// Fourier differentiation matrix in `θ`; exact on modes `|n| ≤ K`
    /// with `n_theta = 2K + 1`.
    pub d_theta: Mat<f64>,
}

/// Fourier differentiation on `n` equispaced points (`n` odd).
pub fn fourier_diff(n: usize) -> Mat<f64> {
    let h = 2.0 * PI / n as f64;
    Mat::from_fn(n, n, |j, k| {
        if j == k {
            0.0
        } else {
            let d = j as f64 - k as f64;
            let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * d * h).sin()
        }
    })
}

impl PolarGrid {
    /// `n_rho` radial nodes on `(0, rho_max]` and `2 modes + 1` angles.
    pub fn new(n_rho: usize, modes: usize, rho_max: f64, ell: Option<f64>) -> Result<Self> {
        if modes < 1 {
            return Err(Error::invalid("polar grid needs at least one angular mode"));
        }
        if let Some(l) = ell {
            if !(l.is_finite() && l > rho_max) {
                return Err(Error::invalid(format!(
                    "disc of radius {rho_max} reaches the symmetry axis at offset ell = {l}"
                )));
            }
        }
        let radial = RadialGrid::new(n_rho, rho_max, Mapping::Geometric)?;
        let n_theta = 2 * modes + 1;
        let theta = (0..n_theta).map(|j| 2.0 * PI * j as f64 / n_theta as f64).collect();
        Ok(Self { ell, radial, n_theta, theta, d_theta: fourier_diff(n_theta) })
    }

    /// Same discretisation at another ring offset.
    pub fn with_ell(&self, ell: Option<f64>) -> Result<Self> {
        if let Some(l) = ell {
            if !(l.is_finite() && l > self.rho_max()) {
                return Err(Error::invalid(format!(
                    "disc of radius {} reaches the symmetry axis at offset ell = {l}",
                    self.rho_max()
                )));
            }
        }
        let mut g = self.clone();
        g.ell = ell;
        Ok(g)
    }

    pub fn n_rho(&self) -> usize {
        self.radial.len()
    }

    pub fn modes(&self) -> usize {
        (self.n_theta - 1) / 2
    }

    pub fn rho_max(&self) -> f64 {
        self.radial.rho_max
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// Polar coordinates of every node.
    pub fn polar_nodes(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.n_rho() * self.n_theta);
        for &r in &self.radial.rho {
            for &t in &self.theta {
                out.push((r, t));
            }
        }
        out
    }

    /// `∂_ϱ` and `∂_θ` on full nodal fields.
    pub fn d_rho_field(&self, f: &[f64]) -> Vec<f64> {
        let (nr, nt) = (self.n_rho(), self.n_theta);
        let mut out = vec![0.0; f.len()];
        for i in 0..nr {
            for k in 0..nr {
                let c = self.radial.d1[(i, k)];
                for j in 0..nt {
                    out[i * nt + j] += c * f[k * nt + j];
                }
            }
        }
        out
    }

    pub fn d_theta_field(&self, f: &[f64]) -> Vec<f64> {
        let nt = self.n_theta;
        let mut out = vec![0.0; f.len()];
        for (row, o) in f.chunks(nt).zip(out.chunks_mut(nt)) {
            for j in 0..nt {
                o[j] = (0..nt).map(|k| self.d_theta[(j, k)] * row[k]).sum();
            }
        }
        out
    }

    /// Dense `∂_ϱ` and `∂_θ` on all nodes.
    pub fn d_rho_matrix(&self) -> Mat<f64> {
        let nt = self.n_theta;
        let n = self.n_rho() * nt;
        Mat::from_fn(n, n, |p, q| if p % nt == q % nt { self.radial.d1[(p / nt, q / nt)] } else { 0.0 })
    }

    pub fn d_theta_matrix(&self) -> Mat<f64> {
        let nt = self.n_theta;
        let n = self.n_rho() * nt;
        Mat::from_fn(n, n, |p, q| if p / nt == q / nt { self.d_theta[(p % nt, q % nt)] } else { 0.0 })
    }

    /// Dense polar Laplacian `∂ϱϱ + ϱ^{-1}∂ϱ + ϱ^{-2}∂θθ` on all nodes.
    pub fn laplacian_matrix(&self) -> Mat<f64> {
        let nt = self.n_theta;
        let n = self.n_rho() * nt;
        let d2t = &self.d_theta * &self.d_theta;
        let g = &self.radial;
        Mat::from_fn(n, n, |p, q| {
            let (i, j) = (p / nt, p % nt);
            let (k, l) = (q / nt, q % nt);
            let r = g.rho[i];
            let mut v = 0.0;
            if j == l {
                v += g.d2[(i, k)] + g.d1[(i, k)] / r;
            }
            if i == k {
                v += d2t[(j, l)] / (r * r);
            }
            v
        })
    }

    /// Cartesian gradient matrices on all nodes (square).
    pub fn grad_full(&self) -> (Mat<f64>, Mat<f64>) {
        let dr = self.d_rho_matrix();
        let dt = self.d_theta_matrix();
        let pol = self.polar_nodes();
        let n = pol.len();
        let gx = Mat::from_fn(n, n, |p, q| {
            let (r, t) = pol[p];
            t.cos() * dr[(p, q)] - t.sin() / r * dt[(p, q)]
        });
        let gz = Mat::from_fn(n, n, |p, q| {
            let (r, t) = pol[p];
            t.sin() * dr[(p, q)] + t.cos() / r * dt[(p, q)]
        });
        (gx, gz)
    }

    /// Real Fourier coefficients per radial node: for mode `n` returns the
    /// cosine and sine parts `(a_n, b_n)` with `f = a_0 + Σ a_n cos nθ + b_n sin nθ`.
    pub fn fourier(&self, f: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
        let nt = self.n_theta as f64;
        let scale = if n == 0 { 1.0 / nt } else { 2.0 / nt };
        let mut a = vec![0.0; self.n_rho()];
        let mut b = vec![0.0; self.n_rho()];
        for (i, row) in f.chunks(self.n_theta).enumerate() {
            for (j, v) in row.iter().enumerate() {
                let t = n as f64 * self.theta[j];
                a[i] += scale * v * t.cos();
                b[i] += scale * v * t.sin();
            }
        }
        (a, b)
    }
}

impl FieldGrid for PolarGrid {
    fn ell(&self) -> Option<f64> {
        self.ell
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        self.polar_nodes().into_iter().map(|(r, t)| (r * t.cos(), r * t.sin())).collect()
    }

    fn unknown_nodes(&self) -> Vec<usize> {
        (0..(self.n_rho() - 1) * self.n_theta).collect()
    }

    fn planar_weights(&self) -> Vec<f64> {
        let h = 2.0 * PI / self.n_theta as f64;
        let mut w = Vec::with_capacity(self.n_rho() * self.n_theta);
        for &a in &self.radial.w_area {
            w.extend(std::iter::repeat_n(a * h, self.n_theta));
        }
        w
    }

    fn dx(&self, f: &[f64]) -> Vec<f64> {
        let fr = self.d_rho_field(f);
        let ft = self.d_theta_field(f);
        self.polar_nodes()
            .iter()
            .enumerate()
            .map(|(p, (r, t))| t.cos() * fr[p] - t.sin() / r * ft[p])
            .collect()
    }

    fn dz(&self, f: &[f64]) -> Vec<f64> {
        let fr = self.d_rho_field(f);
        let ft = self.d_theta_field(f);
        self.polar_nodes()
            .iter()
            .enumerate()
            .map(|(p, (r, t))| t.sin() * fr[p] + t.cos() / r * ft[p])
            .collect()
    }

    fn grad_matrices(&self) -> (Mat<f64>, Mat<f64>) {
        let (gx, gz) = self.grad_full();
        let nu = self.n_unknowns();
        (gx.subcols(0, nu).to_owned(), gz.subcols(0, nu).to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_derivative_is_exact_on_resolved_modes() {
        let n = 9;
        let d = fourier_diff(n);
        let th: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        for m in 0..=4 {
            let f: Vec<f64> = th.iter().map(|t| (m as f64 * t).sin()).collect();
            for j in 0..n {
                let v: f64 = (0..n).map(|k| d[(j, k)] * f[k]).sum();
                assert!((v - m as f64 * (m as f64 * th[j]).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cartesian_gradient_of_gaussian() {
        let g = PolarGrid::new(40, 6, 7.0, None).unwrap();
        let f = g.sample(|x, z| (-(x - 0.3) * (x - 0.3) - z * z).exp());
        let fx = g.dx(&f);
        let fz = g.dz(&f);
        let nodes = g.nodes();
        let err = nodes
            .iter()
            .enumerate()
            .map(|(p, (x, z))| {
                let e = (-(x - 0.3) * (x - 0.3) - z * z).exp();
                (fx[p] + 2.0 * (x - 0.3) * e).abs().max((fz[p] + 2.0 * z * e).abs())
            })
            .fold(0.0, f64::max);
        // Angular resolution limits the off-centre Gaussian.
        assert!(err < 1e-3, "{err}");
        let w = g.planar_weights();
        let mass: f64 = f.iter().zip(&w).map(|(f, w)| f * w).sum();
        assert!((mass - PI).abs() < 1e-5, "{mass}");
    }

    #[test]
    fn offset_must_clear_axis() {
        assert!(PolarGrid::new(20, 3, 5.0, Some(4.0)).is_err());
        assert!(PolarGrid::new(20, 3, 5.0, Some(10.0)).is_ok());
    }
}
