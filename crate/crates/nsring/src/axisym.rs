//! Axisymmetric (no swirl) linearisation of the Euler equations around a
//! vortex ring whose cross-section is the truncated planar vortex placed at
//! distance `ℓ` from the symmetry axis.
//!
//! Fields live on a [`FieldGrid`] in offset coordinates `(x, z)` with
//! `x = r′ − ℓ`. The production discretisation is the [`PolarGrid`] centred
//! on the vortex; the Cartesian [`MeridionalGrid`] box is kept for problems
//! whose domain must reach the axis.

use crate::error::{Error, Result};
use crate::euler2d::{gamma, stream_matrix};
use crate::numerics::linalg::{self, ShiftInvertOptions};
use crate::numerics::quad;
use crate::numerics::{
    contour_projection, ContourOptions, FieldGrid, Measure, MeridionalGrid, OperatorMatrix, PolarGrid,
};
use crate::profiles::{RadialVortex, TruncatedProfile};
use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use serde::Serialize;
use std::f64::consts::PI;

/// `F(ϱ) = −∫_ϱ^∞ s ζ_R(s) ds`. The field `w = (0, F)` satisfies
/// `∂_x w^x + ∂_z w^z = −ũ^x` and vanishes outside the truncation radius.
pub fn correction_potential(t: &TruncatedProfile, rho: f64) -> f64 {
    let r_cut = t.r_cut;
    if rho >= r_cut {
        return 0.0;
    }
    let panels = 4 + (8.0 * (r_cut - rho)).ceil() as usize;
    -quad::composite(|s| s * t.zeta(s), rho, r_cut, panels, 10)
}

/// Background ring `ũ_ℓ = ũ + v_ℓ` sampled at every node.
#[derive(Debug, Clone)]
pub struct Background {
    pub ell: Option<f64>,
    pub r_bar: f64,
    pub ux: Vec<f64>,
    pub uz: Vec<f64>,
    /// Divergence correction `v_ℓ^z` (`v_ℓ^x = 0`).
    pub vz: Vec<f64>,
    /// `div_{2d} v_ℓ = ∂_z v_ℓ^z`.
    pub div_v: Vec<f64>,
    /// `ω̃_ℓ = ∂_x ũ_ℓ^z − ∂_z ũ_ℓ^x` and its gradient.
    pub omega: Vec<f64>,
    pub omega_x: Vec<f64>,
    pub omega_z: Vec<f64>,
    /// `w = (x + ℓ) v_ℓ`, independent of `ℓ`.
    pub w_corr: Vec<f64>,
    /// Max of `|div_ℓ ũ_ℓ|` from the closed-form derivatives.
    pub residual: f64,
    /// Same quantity with grid differentiation of the sampled fields.
    pub residual_discrete: f64,
}

impl Background {
    pub fn max_correction(&self) -> f64 {
        self.vz.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Lift the truncated planar vortex to a ring at distance `ℓ` from the
/// axis, divergence free for `div_ℓ u = (x+ℓ)^{-1} ∂_x((x+ℓ) u^x) + ∂_z u^z`.
/// In the planar limit the correction vanishes.
pub fn lift_background<G: FieldGrid>(t: &TruncatedProfile, grid: &G) -> Result<Background> {
    let r_bar = t.r_cut;
    if let Some(l) = grid.ell() {
        if l < 2.0 * r_bar {
            return Err(Error::Precondition(format!(
                "ring offset ell = {l} must be at least 2 R = {}",
                2.0 * r_bar
            )));
        }
    }
    let nodes = grid.nodes();
    let reach = nodes.iter().map(|(x, z)| x.abs().max(z.abs())).fold(0.0, f64::max);
    if reach < r_bar / 2f64.sqrt() {
        return Err(Error::Precondition(format!(
            "grid of extent {reach} does not contain the vortex support radius {r_bar}"
        )));
    }
    let n = nodes.len();
    let mut bg = Background {
        ell: grid.ell(),
        r_bar,
        ux: vec![0.0; n],
        uz: vec![0.0; n],
        vz: vec![0.0; n],
        div_v: vec![0.0; n],
        omega: vec![0.0; n],
        omega_x: vec![0.0; n],
        omega_z: vec![0.0; n],
        w_corr: vec![0.0; n],
        residual: 0.0,
        residual_discrete: 0.0,
    };
    let mut res = 0.0f64;
    for (k, &(x, z)) in nodes.iter().enumerate() {
        let rho = x.hypot(z);
        if rho >= r_bar {
            continue;
        }
        let zeta = t.zeta(rho);
        let om = t.omega(rho);
        let omp = t.omega_prime(rho);
        // ζ′ = (ω̄ − 2ζ)/ϱ, which vanishes at the origin.
        let (ex, ez, zp) = if rho > 1e-12 { (x / rho, z / rho, (om - 2.0 * zeta) / rho) } else { (0.0, 0.0, 0.0) };
        bg.ux[k] = -z * zeta;
        bg.uz[k] = x * zeta;
        bg.omega[k] = om;
        bg.omega_x[k] = omp * ex;
        bg.omega_z[k] = omp * ez;
        let mut div = -z * zp * ex + x * zp * ez;
        if let Some(l) = grid.ell() {
            let f = correction_potential(t, rho);
            let inv = 1.0 / (x + l);
            bg.w_corr[k] = f;
            bg.vz[k] = f * inv;
            bg.uz[k] += f * inv;
            bg.div_v[k] = zeta * z * inv;
            bg.omega[k] += zeta * x * inv - f * inv * inv;
            bg.omega_x[k] +=
                zp * ex * x * inv + zeta * l * inv * inv - zeta * x * inv * inv + 2.0 * f * inv.powi(3);
            bg.omega_z[k] += zp * ez * x * inv - zeta * z * inv * inv;
            div += bg.ux[k] * inv + bg.div_v[k];
        }
        res = res.max(div.abs());
    }
    bg.residual = res;
    let rad: Vec<f64> = nodes.iter().map(|(x, _)| grid.radius(*x)).collect();
    let rux: Vec<f64> = bg.ux.iter().zip(&rad).map(|(u, a)| u * a).collect();
    let d1 = grid.dx(&rux);
    let d2 = grid.dz(&bg.uz);
    bg.residual_discrete = d1
        .iter()
        .zip(&d2)
        .zip(&rad)
        .map(|((a, b), r)| (a / r + b).abs())
        .fold(0.0, f64::max);
    Ok(bg)
}

/// `ψ` at physical radius `r′` and height `z` generated by a unit vortex
/// ring at `(a, z0)`: the free-space Green's function of
/// `∂_{r′}² + r′^{-1}∂_{r′} − r′^{-2} + ∂_z²`.
pub fn ring_green(rp: f64, z: f64, a: f64, z0: f64) -> f64 {
    if rp <= 0.0 || a <= 0.0 {
        return 0.0;
    }
    let dz2 = (z - z0).powi(2);
    let sum2 = (rp + a).powi(2) + dz2;
    let m = 4.0 * a * rp / sum2;
    let m1 = ((rp - a).powi(2) + dz2) / sum2;
    let (kk, ee) = quad::elliptic_ke(m, m1);
    -(1.0 / (PI * m.sqrt())) * (a / rp).sqrt() * ((1.0 - 0.5 * m) * kk - ee)
}

/// Free-space Green's function of the planar Laplacian.
pub fn planar_green(x: f64, z: f64, x0: f64, z0: f64) -> f64 {
    ((x - x0).powi(2) + (z - z0).powi(2)).ln() / (4.0 * PI)
}

/// Dense Biot-Savart law from vorticity at the unknowns to `ψ` and the
/// velocity `u = (−∂_z ψ, ∂_x ψ + ψ/(x+ℓ))` at every node, where
/// `Δ_ℓ ψ = ω` in the whole meridional half-plane.
#[derive(Debug, Clone)]
pub struct BiotSavart {
    pub psi: Mat<f64>,
    pub ux: Mat<f64>,
    pub uz: Mat<f64>,
}

/// Grids that carry a Biot-Savart solver.
pub trait StreamGrid: FieldGrid {
    fn biot_savart(&self) -> Result<BiotSavart>;
}

fn green_boundary_data<G: FieldGrid>(grid: &G, boundary: &[usize]) -> Mat<f64> {
    let nodes = grid.nodes();
    let unk = grid.unknown_nodes();
    let q = grid.unknown_weights(Measure::Planar);
    Mat::from_fn(boundary.len(), unk.len(), |b, k| {
        let (x, z) = nodes[boundary[b]];
        let (x0, z0) = nodes[unk[k]];
        let g = match grid.ell() {
            Some(l) => ring_green(x + l, z, x0 + l, z0),
            None => planar_green(x, z, x0, z0),
        };
        g * q[k]
    })
}

fn velocities_from_stream<G: FieldGrid>(grid: &G, psi: Mat<f64>) -> BiotSavart {
    let nodes = grid.nodes();
    let (n, m) = (psi.nrows(), psi.ncols());
    let mut ux = Mat::<f64>::zeros(n, m);
    let mut uz = Mat::<f64>::zeros(n, m);
    for q in 0..m {
        let col: Vec<f64> = (0..n).map(|p| psi[(p, q)]).collect();
        let dz = grid.dz(&col);
        let dx = grid.dx(&col);
        for p in 0..n {
            ux[(p, q)] = -dz[p];
            uz[(p, q)] = dx[p] + grid.inv_radius(nodes[p].0) * col[p];
        }
    }
    BiotSavart { psi, ux, uz }
}

impl StreamGrid for MeridionalGrid {
    /// Collocation of `Δ_ℓ` on the box interior with boundary values of `ψ`
    /// taken from the free-space kernel.
    fn biot_savart(&self) -> Result<BiotSavart> {
        let (nr, nz) = (self.nr, self.nz);
        let nint = self.n_int();
        let bnd: Vec<(usize, usize)> = (0..nr)
            .flat_map(|i| (0..nz).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_boundary(i, j))
            .collect();
        let bnd_idx: Vec<usize> = bnd.iter().map(|&(i, j)| self.full_index(i, j)).collect();
        let gb = green_boundary_data(self, &bnd_idx);
        let d2r = &self.dr * &self.dr;
        let d2z = &self.dz * &self.dz;
        let lap_entry = |i: usize, j: usize, k: usize, l: usize| -> f64 {
            let inv = FieldGrid::inv_radius(self, self.r[i]);
            let mut v = 0.0;
            if j == l {
                v += d2r[(i, k)] + inv * self.dr[(i, k)];
            }
            if i == k {
                v += d2z[(j, l)];
                if j == l {
                    v -= inv * inv;
                }
            }
            v
        };
        let nzi = nz - 2;
        let lii = Mat::<f64>::from_fn(nint, nint, |p, q| lap_entry(p / nzi + 1, p % nzi + 1, q / nzi + 1, q % nzi + 1));
        let lib = Mat::<f64>::from_fn(nint, bnd.len(), |p, b| {
            let (k, l) = bnd[b];
            lap_entry(p / nzi + 1, p % nzi + 1, k, l)
        });
        let rhs = Mat::<f64>::identity(nint, nint) - &lib * &gb;
        let psi_i = lii.partial_piv_lu().solve(&rhs);
        let mut psi = Mat::<f64>::zeros(self.n_full(), nint);
        for p in 0..nint {
            let row = self.full_index(p / nzi + 1, p % nzi + 1);
            for q in 0..nint {
                psi[(row, q)] = psi_i[(p, q)];
            }
        }
        for (b, &row) in bnd_idx.iter().enumerate() {
            for q in 0..nint {
                psi[(row, q)] = gb[(b, q)];
            }
        }
        Ok(velocities_from_stream(self, psi))
    }
}

impl StreamGrid for PolarGrid {
    /// In the planar limit each Fourier mode is solved with its exact
    /// exterior closure (the same radial solver as the mode operators); for
    /// finite `ℓ`, `Δ_ℓ` is collocated on the disc with Dirichlet data from
    /// the ring kernel on the outer circle.
    fn biot_savart(&self) -> Result<BiotSavart> {
        let nt = self.n_theta;
        let nr = self.n_rho();
        let nn = nr * nt;
        let nu = (nr - 1) * nt;
        let psi = match self.ell {
            None => {
                let rg = &self.radial;
                // Mode 0: Dirichlet value of the logarithmic potential.
                let mut l0 = Mat::<f64>::from_fn(nr, nr, |i, j| rg.d2[(i, j)] + rg.d1[(i, j)] / rg.rho[i]);
                let mut r0 = Mat::<f64>::identity(nr, nr);
                for j in 0..nr {
                    l0[(nr - 1, j)] = if j == nr - 1 { 1.0 } else { 0.0 };
                    r0[(nr - 1, j)] = rg.rho_max.ln() * rg.w_area[j];
                }
                let mut solvers = vec![l0.partial_piv_lu().solve(&r0)];
                for n in 1..=self.modes() {
                    solvers.push(stream_matrix(rg, n as i64));
                }
                let cos_table: Vec<Vec<f64>> = (0..=self.modes())
                    .map(|n| (0..nt).map(|d| (n as f64 * 2.0 * PI * d as f64 / nt as f64).cos()).collect())
                    .collect();
                Mat::from_fn(nn, nu, |p, q| {
                    let (i, j) = (p / nt, p % nt);
                    let (k, l) = (q / nt, q % nt);
                    let d = (j + nt - l) % nt;
                    let mut v = solvers[0][(i, k)] / nt as f64;
                    for n in 1..=self.modes() {
                        v += 2.0 / nt as f64 * solvers[n][(i, k)] * cos_table[n][d];
                    }
                    v
                })
            }
            Some(_) => {
                let nodes = self.nodes();
                let (gx, _) = self.grad_full();
                let mut lap = self.laplacian_matrix();
                for p in 0..nu {
                    let inv = FieldGrid::inv_radius(self, nodes[p].0);
                    for q in 0..nn {
                        lap[(p, q)] += inv * gx[(p, q)];
                    }
                    lap[(p, p)] -= inv * inv;
                }
                for p in nu..nn {
                    for q in 0..nn {
                        lap[(p, q)] = if p == q { 1.0 } else { 0.0 };
                    }
                }
                let bnd: Vec<usize> = (nu..nn).collect();
                let gb = green_boundary_data(self, &bnd);
                let rhs = Mat::<f64>::from_fn(nn, nu, |p, q| if p < nu { if p == q { 1.0 } else { 0.0 } } else { gb[(p - nu, q)] });
                lap.partial_piv_lu().solve(&rhs)
            }
        };
        Ok(velocities_from_stream(self, psi))
    }
}

impl BiotSavart {
    fn apply(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; m.nrows()];
        for (q, &xq) in x.iter().enumerate() {
            if xq == 0.0 {
                continue;
            }
            let col = m.col(q);
            for p in 0..m.nrows() {
                y[p] += col[p] * xq;
            }
        }
        y
    }

    /// Velocity `(u^x, u^z)` at every node for vorticity at the unknowns.
    pub fn velocity(&self, omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (Self::apply(&self.ux, omega), Self::apply(&self.uz, omega))
    }

    pub fn stream(&self, omega: &[f64]) -> Vec<f64> {
        Self::apply(&self.psi, omega)
    }
}

/// Inner-product weight `γ dx dz` at the unknowns.
pub fn gamma_weights<G: FieldGrid>(grid: &G, r_bar: f64) -> Vec<f64> {
    let q = grid.unknown_weights(Measure::Planar);
    let nodes = grid.nodes();
    grid.unknown_nodes()
        .iter()
        .zip(&q)
        .map(|(&i, q)| q * gamma(nodes[i].0.hypot(nodes[i].1), r_bar))
        .collect()
}

/// Transport `u·∇` from unknowns to unknowns.
pub fn transport<G: FieldGrid>(grid: &G, ux: &[f64], uz: &[f64]) -> Mat<f64> {
    let (gx, gz) = grid.grad_matrices();
    let unk = grid.unknown_nodes();
    let n = unk.len();
    Mat::from_fn(n, n, |p, q| {
        let i = unk[p];
        ux[i] * gx[(i, q)] + uz[i] * gz[(i, q)]
    })
}

/// `½ (T − W^{-1} Tᵀ W)`: skew-adjoint in `ℓ²(w)`. For a transport field
/// `T = u·∇` this approximates `u·∇ + ½ div u`.
pub fn skew_part(t: &Mat<f64>, w: &[f64]) -> Mat<f64> {
    let n = t.nrows();
    Mat::from_fn(n, n, |p, q| 0.5 * (t[(p, q)] - t[(q, p)] * w[q] / w[p]))
}

fn to_c(m: &Mat<f64>) -> Mat<c64> {
    linalg::to_complex(m.as_ref())
}

/// Assemble `L_ℓ = M_ℓ + K_ℓ + S_ℓ` on `L²_γ` with parts `M`, `K`, `S`:
/// `−M_ℓ ω = ũ_ℓ·∇ω + ½ (div v_ℓ) ω`, `−K_ℓ ω = u·∇ω̃_ℓ`,
/// `S_ℓ ω = (ũ_ℓ^x ω + u^x ω̃_ℓ)/(x+ℓ) + ½ (div v_ℓ) ω`.
pub fn assemble_axisym_operator<G: FieldGrid>(bg: &Background, bs: &BiotSavart, grid: &G) -> OperatorMatrix {
    let w = gamma_weights(grid, bg.r_bar);
    let nodes = grid.nodes();
    let unk = grid.unknown_nodes();
    let n = unk.len();
    let t = transport(grid, &bg.ux, &bg.uz);
    let m = skew_part(&t, &w) * -1.0;
    let k = Mat::<f64>::from_fn(n, n, |p, q| {
        let i = unk[p];
        -bg.omega_x[i] * bs.ux[(i, q)] - bg.omega_z[i] * bs.uz[(i, q)]
    });
    let s = Mat::<f64>::from_fn(n, n, |p, q| {
        let i = unk[p];
        let inv = grid.inv_radius(nodes[i].0);
        let mut v = bg.omega[i] * inv * bs.ux[(i, q)];
        if p == q {
            v += bg.ux[i] * inv + 0.5 * bg.div_v[i];
        }
        v
    });
    OperatorMatrix::from_parts(vec![("M".into(), to_c(&m)), ("K".into(), to_c(&k)), ("S".into(), to_c(&s))], w)
}

/// Everything assembled for one ring offset.
pub struct RingOperator {
    pub grid: PolarGrid,
    pub background: Background,
    pub biot_savart: BiotSavart,
    pub op: OperatorMatrix,
}

pub fn build_ring_operator(t: &TruncatedProfile, base: &PolarGrid, ell: Option<f64>) -> Result<RingOperator> {
    let grid = base.with_ell(ell)?;
    let background = lift_background(t, &grid)?;
    let biot_savart = grid.biot_savart()?;
    let op = assemble_axisym_operator(&background, &biot_savart, &grid);
    Ok(RingOperator { grid, background, biot_savart, op })
}

/// Eigenpair of an operator nearest to `target`.
pub fn nearest_eigenpair(op: &OperatorMatrix, target: c64) -> Result<linalg::EigenPair> {
    let shift = target + c64::new(1e-3 * target.norm().max(1e-2), 0.0);
    let pairs = linalg::shift_invert(op.total.as_ref(), shift, 1, ShiftInvertOptions::default())?;
    pairs.into_iter().next().ok_or_else(|| Error::NonConvergence { iterations: 0, detail: "no eigenpair returned".into() })
}

#[derive(Debug, Clone, Serialize)]
pub struct EllRow {
    /// `None` for the planar limit.
    pub ell: Option<f64>,
    pub re: f64,
    pub im: f64,
    pub distance: f64,
    pub s_norm: f64,
    /// `‖M + M*‖ / ‖M‖` in the operator's weights.
    pub m_skew: f64,
    pub riesz_rank: usize,
    pub residual: f64,
}

/// Follow `λ_∞` through the ring offsets `ells`.
pub fn ell_continuation(
    t: &TruncatedProfile,
    base: &PolarGrid,
    ells: &[Option<f64>],
    lambda_inf: c64,
    contour_radius: f64,
) -> Result<Vec<EllRow>> {
    let mut rows = Vec::new();
    for &ell in ells {
        let ring = build_ring_operator(t, base, ell)?;
        let pair = nearest_eigenpair(&ring.op, lambda_inf)?;
        let s_norm = ring.op.part_norm("S").unwrap_or(0.0);
        let m_skew = ring.op.skew_defect("M").unwrap_or(0.0);
        let riesz_rank = projection_rank(&ring.op, lambda_inf, contour_radius)?;
        rows.push(EllRow {
            ell,
            re: pair.lambda.re,
            im: pair.lambda.im,
            distance: (pair.lambda - lambda_inf).norm(),
            s_norm,
            m_skew,
            riesz_rank,
            residual: pair.residual,
        });
    }
    Ok(rows)
}

/// Rank of the Riesz projection on the circle `|λ − center| = radius`,
/// retrying once with half the radius if the contour meets the spectrum.
pub fn projection_rank(op: &OperatorMatrix, center: c64, radius: f64) -> Result<usize> {
    match contour_projection(op.total.as_ref(), center, radius, ContourOptions::default()) {
        Ok(p) => Ok(p.report.rank),
        Err(Error::ContourTooClose(_)) => {
            Ok(contour_projection(op.total.as_ref(), center, 0.5 * radius, ContourOptions::default())?.report.rank)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamRow {
    pub ell: f64,
    /// `‖∇(ψ_ℓ − ψ_∞)‖_{L²(B_R̄)}`.
    pub grad_gap: f64,
    /// `‖(x+ℓ)^{-1} ψ_ℓ‖_{L²(B_R̄)}`.
    pub scaled_stream: f64,
}

/// Compare the ring stream function of a fixed vorticity with the planar one.
pub fn stream_convergence_study(
    base: &PolarGrid,
    omega: impl Fn(f64, f64) -> f64,
    r_bar: f64,
    ells: &[f64],
) -> Result<Vec<StreamRow>> {
    let planar = base.with_ell(None)?;
    let om = planar.restrict(&planar.sample(&omega));
    let psi_inf = planar.biot_savart()?.stream(&om);
    let w = planar.planar_weights();
    let nodes = planar.nodes();
    let inside: Vec<f64> = nodes
        .iter()
        .zip(&w)
        .map(|((x, z), w)| if x.hypot(*z) <= r_bar { *w } else { 0.0 })
        .collect();
    let mut rows = Vec::new();
    for &ell in ells {
        let g = base.with_ell(Some(ell))?;
        let psi = g.biot_savart()?.stream(&om);
        let diff: Vec<f64> = psi.iter().zip(&psi_inf).map(|(a, b)| a - b).collect();
        let (dx, dz) = (g.dx(&diff), g.dz(&diff));
        let grad_gap = dx.iter().zip(&dz).zip(&inside).map(|((a, b), w)| w * (a * a + b * b)).sum::<f64>().sqrt();
        let scaled_stream = psi
            .iter()
            .zip(&nodes)
            .zip(&inside)
            .map(|((p, (x, _)), w)| w * (p / (x + ell)).powi(2))
            .sum::<f64>()
            .sqrt();
        rows.push(StreamRow { ell, grad_gap, scaled_stream });
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{truncate, Family, RadialVortex, VortexProfile};
    use proptest::prelude::*;

    fn seed(n_rho: usize, modes: usize) -> (PolarGrid, TruncatedProfile) {
        let p = VortexProfile::new(Family::TailP2 { amp: 2.5, tail: 0.05, shield: 4.0, width: 1.0 }, 2).unwrap();
        let base = PolarGrid::new(n_rho, modes, 5.0, None).unwrap();
        let t = truncate(&p, 4.0, &base.radial).unwrap();
        (base, t)
    }

    #[test]
    fn planar_limit_has_no_ring_terms() {
        let (base, t) = seed(40, 3);
        let ring = build_ring_operator(&t, &base, None).unwrap();
        assert_eq!(ring.background.max_correction(), 0.0);
        assert_eq!(ring.op.part_norm("S").unwrap(), 0.0);
        assert!(ring.op.skew_defect("M").unwrap() < 1e-12);
    }

    #[test]
    fn lifted_ring_is_divergence_free_and_m_is_skew() {
        let (base, t) = seed(40, 3);
        for ell in [16.0, 64.0] {
            let ring = build_ring_operator(&t, &base, Some(ell)).unwrap();
            assert!(ring.background.residual < 1e-10, "residual {}", ring.background.residual);
            assert!(ring.op.skew_defect("M").unwrap() < 1e-10);
            assert!(ring.op.parts_sum_gap() < 1e-12);
        }
    }

    #[test]
    fn ring_terms_shrink_with_distance() {
        let (base, t) = seed(40, 3);
        let s: Vec<f64> = [16.0, 32.0, 64.0]
            .iter()
            .map(|l| build_ring_operator(&t, &base, Some(*l)).unwrap().op.part_norm("S").unwrap())
            .collect();
        assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
        let bgs: Vec<Background> =
            [16.0, 64.0].iter().map(|l| lift_background(&t, &base.with_ell(Some(*l)).unwrap()).unwrap()).collect();
        assert_eq!(bgs[0].w_corr, bgs[1].w_corr);
        let ratio = bgs[0].max_correction() / bgs[1].max_correction();
        assert!((ratio - 4.0).abs() < 0.05, "v_ell should scale like 1/ell: {ratio}");
    }

    #[test]
    fn ring_green_solves_the_axisymmetric_laplacian() {
        let (a, z0) = (3.0, 0.5);
        let h = 1e-3;
        for (r, z) in [(1.0, 0.0), (4.5, 2.0), (3.0, -1.5)] {
            let g = |r: f64, z: f64| ring_green(r, z, a, z0);
            let rr = (g(r + h, z) - 2.0 * g(r, z) + g(r - h, z)) / (h * h);
            let zz = (g(r, z + h) - 2.0 * g(r, z) + g(r, z - h)) / (h * h);
            let dr = (g(r + h, z) - g(r - h, z)) / (2.0 * h);
            let lap = rr + dr / r - g(r, z) / (r * r) + zz;
            assert!(lap.abs() < 1e-5 * g(r, z).abs().max(1.0), "({r},{z}): {lap}");
        }
    }

    #[test]
    fn ring_green_approaches_planar_green_far_from_axis() {
        let a = 1e5;
        let pts = [(0.3, 0.2), (-1.0, 1.5), (2.0, -0.7)];
        let ring: Vec<f64> = pts.iter().map(|(x, z)| ring_green(a + x, *z, a, 0.0)).collect();
        let plane: Vec<f64> = pts.iter().map(|(x, z)| planar_green(*x, *z, 0.0, 0.0)).collect();
        for i in 1..pts.len() {
            let d = (ring[i] - ring[0]) - (plane[i] - plane[0]);
            assert!(d.abs() < 1e-4, "{d}");
        }
    }

    #[test]
    fn scaled_stream_decays_with_ring_radius() {
        let (base, t) = seed(40, 3);
        let rows = stream_convergence_study(&base, |x, z| t.zeta(x.hypot(z)), 4.0, &[16.0, 32.0, 64.0]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].scaled_stream < w[0].scaled_stream);
            assert!(w[1].grad_gap < w[0].grad_gap);
        }
    }

    proptest! {
        #[test]
        fn loglog_slope_recovers_power_laws(p in -3.0f64..3.0, c in 0.1f64..10.0) {
            let x = [1.0f64, 2.0, 5.0, 11.0];
            let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
            prop_assert!((loglog_slope(&x, &y) - p).abs() < 1e-10);
        }

        #[test]
        fn skew_part_is_skew_in_its_weights(
            entries in proptest::collection::vec(-1.0f64..1.0, 16),
            w in proptest::collection::vec(0.1f64..5.0, 4),
        ) {
            let t = Mat::<f64>::from_fn(4, 4, |i, j| entries[4 * i + j]);
            let s = skew_part(&t, &w);
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((w[i] * s[(i, j)] + w[j] * s[(j, i)]).abs() < 1e-12);
                }
            }
        }
    }
}
