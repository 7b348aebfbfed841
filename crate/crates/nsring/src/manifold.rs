//! Unstable-manifold trajectory around the self-similar ring: the linear
//! mode `U^lin = Re(e^{τλ}η)`, the Duhamel functionals `G`, `L`, `B` and the
//! contraction `U ↦ G + LU + B(U, U)` in the exponentially weighted norm.
//!
//! Fields are swirl vorticities on the unknowns of the similarity grid; the
//! Sobolev index `N` of the velocity is carried by `H^{N-1}` of the
//! vorticity. Duhamel integrals are evaluated by propagating the forced
//! linear equation from a finite `τ₀` with zero data.

use crate::axisym::BiotSavart;
use crate::error::{Error, Result};
use crate::numerics::{FieldGrid, Measure, PolarGrid};
use crate::selfsim::{fit_growth, matvec, GrowthFit, Propagator};
use faer::c64;
use serde::Serialize;

/// Conservative form of the swirl component of `curl((u·∇)v)` for
/// axisymmetric fields without swirl: `∂_r(u^r ω_v) + ∂_z(u^z ω_v)`.
pub struct Nonlinear<'a> {
    pub grid: &'a PolarGrid,
    pub bs: &'a BiotSavart,
}

impl<'a> Nonlinear<'a> {
    pub fn new(grid: &'a PolarGrid, bs: &'a BiotSavart) -> Self {
        Self { grid, bs }
    }

    pub fn velocity(&self, omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.bs.velocity(omega)
    }

    /// `b(u, ω_v)` with `u` given at every node and `ω_v` at the unknowns.
    pub fn apply_with(&self, u: &(Vec<f64>, Vec<f64>), omega_v: &[f64]) -> Vec<f64> {
        let w = self.grid.embed(omega_v);
        let fx: Vec<f64> = u.0.iter().zip(&w).map(|(a, b)| a * b).collect();
        let fz: Vec<f64> = u.1.iter().zip(&w).map(|(a, b)| a * b).collect();
        let dx = self.grid.dx(&fx);
        let dz = self.grid.dz(&fz);
        let sum: Vec<f64> = dx.iter().zip(&dz).map(|(a, b)| a + b).collect();
        self.grid.restrict(&sum)
    }

    pub fn apply(&self, omega_u: &[f64], omega_v: &[f64]) -> Vec<f64> {
        self.apply_with(&self.velocity(omega_u), omega_v)
    }
}

/// The unstable eigenmode of the similarity operator.
#[derive(Debug, Clone)]
pub struct LinearMode {
    pub lambda: c64,
    /// Normalised to unit volume `L²` norm, largest entry real positive.
    pub eta: Vec<c64>,
}

impl LinearMode {
    pub fn new(lambda: c64, eta: &[c64], weights: &[f64], residual: f64) -> Result<Self> {
        if lambda.re <= 0.0 {
            return Err(Error::NotUnstable(format!("growth rate a = {} is not positive", lambda.re)));
        }
        if residual > 1e-6 {
            return Err(Error::Precondition(format!("eigenpair residual {residual:.3e} exceeds 1e-6")));
        }
        let (imax, _) = eta
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        let phase = eta[imax].conj() / eta[imax].norm();
        let norm = eta.iter().zip(weights).map(|(z, w)| w * z.norm_sqr()).sum::<f64>().sqrt();
        let eta = eta.iter().map(|z| z * phase / norm).collect();
        Ok(Self { lambda, eta })
    }

    pub fn a(&self) -> f64 {
        self.lambda.re
    }

    /// `U^lin(τ) = Re(e^{τλ} η)`.
    pub fn at(&self, tau: f64) -> Vec<f64> {
        let e = (self.lambda * tau).exp();
        self.eta.iter().map(|z| (e * z).re).collect()
    }

    /// Oscillation period `2π/|b|` of the phase, if `b ≠ 0`.
    pub fn period(&self) -> Option<f64> {
        (self.lambda.im != 0.0).then(|| 2.0 * std::f64::consts::PI / self.lambda.im.abs())
    }
}

/// Snapshots on the uniform grid `τ_i = τ₀ + i dτ` with the weighted norm
/// `sup e^{-rate τ} ‖·‖_{H^{N-1}}`.
#[derive(Debug, Clone)]
pub struct WeightedTrajectory {
    pub tau0: f64,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub rate: f64,
    pub index: usize,
}

pub fn sobolev_norm(grid: &PolarGrid, u: &[f64], index: usize) -> f64 {
    grid.sobolev(&grid.embed(u), index.saturating_sub(1), Measure::Cylindrical)
}

impl WeightedTrajectory {
    pub fn new(grid: &PolarGrid, tau0: f64, dt: f64, states: Vec<Vec<f64>>, rate: f64, index: usize) -> Result<Self> {
        if index < 3 {
            return Err(Error::invalid(format!("Sobolev index must exceed 5/2, got {index}")));
        }
        let norms = states.iter().map(|s| sobolev_norm(grid, s, index)).collect();
        Ok(Self { tau0, dt, states, norms, rate, index })
    }

    pub fn zeros(grid: &PolarGrid, tau0: f64, dt: f64, steps: usize, rate: f64, index: usize) -> Result<Self> {
        let n = grid.n_unknowns();
        Self::new(grid, tau0, dt, vec![vec![0.0; n]; steps + 1], rate, index)
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau0 + self.dt * i as f64
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.states.len()).map(|i| self.tau(i)).collect()
    }

    pub fn x_norm(&self) -> f64 {
        self.norms
            .iter()
            .enumerate()
            .map(|(i, n)| (-self.rate * self.tau(i)).exp() * n)
            .fold(0.0, f64::max)
    }

    /// Relative deviation of the stored norms from a recomputation.
    pub fn norm_consistency(&self, grid: &PolarGrid) -> f64 {
        self.states
            .iter()
            .zip(&self.norms)
            .map(|(s, n)| (sobolev_norm(grid, s, self.index) - n).abs() / n.max(1e-300))
            .fold(0.0, f64::max)
    }

    pub fn difference(&self, other: &Self, grid: &PolarGrid) -> Result<Self> {
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| a - b).collect())
            .collect();
        Self::new(grid, self.tau0, self.dt, states, self.rate, self.index)
    }

    pub fn scaled(&self, c: f64, grid: &PolarGrid) -> Result<Self> {
        let states = self.states.iter().map(|s| s.iter().map(|v| c * v).collect()).collect();
        Self::new(grid, self.tau0, self.dt, states, self.rate, self.index)
    }
}

/// What the Duhamel functionals need: the grid, the Biot-Savart law, the
/// linear propagator and the unstable mode.
pub struct ManifoldContext<'a> {
    pub grid: &'a PolarGrid,
    pub bs: &'a BiotSavart,
    pub prop: &'a Propagator,
    pub mode: &'a LinearMode,
}

/// `U^lin` sampled on the trajectory grid.
pub fn build_ulin(ctx: &ManifoldContext, tau0: f64, steps: usize, rate: f64, index: usize) -> Result<WeightedTrajectory> {
    let dt = ctx.prop.dt;
    let states = (0..=steps).map(|i| ctx.mode.at(tau0 + dt * i as f64)).collect();
    WeightedTrajectory::new(ctx.grid, tau0, dt, states, rate, index)
}

impl<'a> ManifoldContext<'a> {
    fn nonlinear(&self) -> Nonlinear<'a> {
        Nonlinear::new(self.grid, self.bs)
    }

    /// `∫_{τ₀}^τ e^{(τ-s)A} f(s) ds` for forcing `f` on the step grid.
    pub fn duhamel(&self, forcing: &[Vec<f64>], shape: &WeightedTrajectory) -> Result<WeightedTrajectory> {
        let n = self.grid.n_unknowns();
        let steps = forcing.len() - 1;
        let zero = vec![0.0; n];
        let states = self.prop.march(&zero, steps, Some(|k: usize| forcing[k].clone()))?;
        WeightedTrajectory::new(self.grid, shape.tau0, shape.dt, states, shape.rate, shape.index)
    }

    /// Forcing `−b(U + U^lin, Ω_V + Ω^lin) + b(U^lin, Ω^lin)` generalised to
    /// the bilinear pieces selected by the flags.
    fn forcing(
        &self,
        ulin: &WeightedTrajectory,
        u: Option<&WeightedTrajectory>,
        v: Option<&WeightedTrajectory>,
        pieces: Pieces,
    ) -> Vec<Vec<f64>> {
        let nl = self.nonlinear();
        let eta_r: Vec<f64> = self.mode.eta.iter().map(|z| z.re).collect();
        let eta_i: Vec<f64> = self.mode.eta.iter().map(|z| z.im).collect();
        let (vr, vi) = (self.bs.velocity(&eta_r), self.bs.velocity(&eta_i));
        (0..ulin.states.len())
            .map(|k| {
                let tau = ulin.tau(k);
                let e = (self.mode.lambda * tau).exp();
                let lin_vel = (
                    vr.0.iter().zip(&vi.0).map(|(a, b)| e.re * a - e.im * b).collect::<Vec<f64>>(),
                    vr.1.iter().zip(&vi.1).map(|(a, b)| e.re * a - e.im * b).collect::<Vec<f64>>(),
                );
                let lin = &ulin.states[k];
                let mut f = vec![0.0; lin.len()];
                let mut add = |g: Vec<f64>| f.iter_mut().zip(g).for_each(|(f, g)| *f -= g);
                let uk = u.map(|u| &u.states[k]);
                let vk = v.map(|v| &v.states[k]);
                if pieces.lin_lin {
                    add(nl.apply_with(&lin_vel, lin));
                }
                if pieces.linear {
                    if let Some(uk) = uk {
                        add(nl.apply_with(&lin_vel, uk));
                        add(nl.apply(uk, lin));
                    }
                }
                if pieces.bilinear {
                    if let (Some(uk), Some(vk)) = (uk, vk) {
                        add(nl.apply(uk, vk));
                    }
                }
                f
            })
            .collect()
    }

    /// `G = −∫ e^{(τ−s)L} b(U^lin, U^lin) ds`.
    pub fn g(&self, ulin: &WeightedTrajectory) -> Result<WeightedTrajectory> {
        let f = self.forcing(ulin, None, None, Pieces { lin_lin: true, linear: false, bilinear: false });
        self.duhamel(&f, ulin)
    }

    /// `LU = −∫ e^{(τ−s)L} [b(U^lin, U) + b(U, U^lin)] ds`.
    pub fn l(&self, ulin: &WeightedTrajectory, u: &WeightedTrajectory) -> Result<WeightedTrajectory> {
        let f = self.forcing(ulin, Some(u), None, Pieces { lin_lin: false, linear: true, bilinear: false });
        self.duhamel(&f, ulin)
    }

    /// `B(U, V) = −∫ e^{(τ−s)L} b(U, V) ds`.
    pub fn b(&self, ulin: &WeightedTrajectory, u: &WeightedTrajectory, v: &WeightedTrajectory) -> Result<WeightedTrajectory> {
        let f = self.forcing(ulin, Some(u), Some(v), Pieces { lin_lin: false, linear: false, bilinear: true });
        self.duhamel(&f, ulin)
    }

    /// `G + LU + B(U, U)` in one forced propagation.
    pub fn map(&self, ulin: &WeightedTrajectory, u: &WeightedTrajectory) -> Result<WeightedTrajectory> {
        let f = self.forcing(ulin, Some(u), Some(u), Pieces { lin_lin: true, linear: true, bilinear: true });
        self.duhamel(&f, ulin)
    }

    /// Right side `A U + f` of the forced equation for `U^per` at step `k`.
    pub fn rhs(&self, ulin: &WeightedTrajectory, uper: &WeightedTrajectory, k: usize) -> Vec<f64> {
        let nl = self.nonlinear();
        let total: Vec<f64> = ulin.states[k].iter().zip(&uper.states[k]).map(|(a, b)| a + b).collect();
        let mut r = matvec(&self.prop.a, &uper.states[k]);
        let b = nl.apply(&total, &total);
        r.iter_mut().zip(b).for_each(|(r, b)| *r -= b);
        r
    }
}

#[derive(Clone, Copy)]
struct Pieces {
    lin_lin: bool,
    linear: bool,
    bilinear: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifoldParams {
    /// Upper end `T` of the trajectory window.
    pub t_end: f64,
    /// `T − τ₀`.
    pub span: f64,
    pub sobolev_index: usize,
    pub eps0: f64,
    pub delta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub max_retries: usize,
}

impl ManifoldParams {
    /// `ε₀ = a/2`, `δ = a/4`, `N = 3`, `τ₀ = T − 10/a`.
    pub fn standard(a: f64, t_end: f64) -> Self {
        Self {
            t_end,
            span: 10.0 / a,
            sobolev_index: 3,
            eps0: 0.5 * a,
            delta: 0.25 * a,
            max_iter: 40,
            tol: 1e-10,
            max_retries: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub t_end: f64,
    pub tau0: f64,
    pub eps0: f64,
    pub delta: f64,
    pub sobolev_index: usize,
    pub retries: usize,
    /// `‖U_k‖_X` per iterate.
    pub x_norms: Vec<f64>,
    /// `‖U_{k+1} − U_k‖_X`.
    pub differences: Vec<f64>,
    /// `differences[k+1] / differences[k]`.
    pub ratios: Vec<f64>,
    /// `‖T(U) − U‖_X / ‖U‖_X` at the final iterate.
    pub residual: f64,
    pub converged: bool,
    pub g_norm: f64,
    pub l_norm: f64,
    pub b_norm: f64,
    /// `‖L‖ + 2‖B‖ + ‖G‖_X` from the measured surrogates.
    pub surrogate_sum: f64,
}

fn relative_ratios(d: &[f64]) -> Vec<f64> {
    d.windows(2).map(|w| w[1] / w[0].max(1e-300)).collect()
}

/// Iterate `U ↦ G + LU + B(U, U)` from `U = 0`, lowering `T` by one unit and
/// retrying while the contraction surrogates or the measured ratios fail.
pub fn fixed_point(
    grid: &PolarGrid,
    bs: &BiotSavart,
    a_op: &faer::Mat<f64>,
    mode: &LinearMode,
    dt: f64,
    params: &ManifoldParams,
) -> Result<(WeightedTrajectory, WeightedTrajectory, FixedPointReport)> {
    let a = mode.a();
    if params.delta >= a {
        return Err(Error::Precondition(format!("delta = {} must be below a = {a}", params.delta)));
    }
    let prop = Propagator::new(a_op.clone(), dt)?;
    let ctx = ManifoldContext { grid, bs, prop: &prop, mode };
    let steps = (params.span / dt).round() as usize;
    let rate = a + params.eps0;
    let mut t_end = params.t_end;
    let mut last = None;
    for retry in 0..=params.max_retries {
        let tau0 = t_end - dt * steps as f64;
        let ulin = build_ulin(&ctx, tau0, steps, rate, params.sobolev_index)?;
        let g = ctx.g(&ulin)?;
        let g_norm = g.x_norm();
        let (l_norm, b_norm) = if g_norm > 0.0 {
            let lg = ctx.l(&ulin, &g)?;
            let bg = ctx.b(&ulin, &g, &g)?;
            (lg.x_norm() / g_norm, bg.x_norm() / (g_norm * g_norm))
        } else {
            (0.0, 0.0)
        };
        let surrogate_sum = l_norm + 2.0 * b_norm + g_norm;
        let mut u = WeightedTrajectory::zeros(grid, tau0, dt, steps, rate, params.sobolev_index)?;
        let mut x_norms = vec![0.0];
        let mut differences = Vec::new();
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..params.max_iter {
            let next = ctx.map(&ulin, &u)?;
            let d = next.difference(&u, grid)?.x_norm();
            differences.push(d);
            x_norms.push(next.x_norm());
            u = next;
            let scale = u.x_norm().max(1e-300);
            residual = d / scale;
            if d <= params.tol * scale || d == 0.0 {
                converged = true;
                break;
            }
            if differences.len() > 2 && d > differences[differences.len() - 2] {
                break;
            }
        }
        let ratios = relative_ratios(&differences);
        let contracting = converged && ratios.iter().all(|r| *r <= 0.5) && surrogate_sum < 1.0;
        let report = FixedPointReport {
            t_end,
            tau0,
            eps0: params.eps0,
            delta: params.delta,
            sobolev_index: params.sobolev_index,
            retries: retry,
            x_norms,
            differences,
            ratios,
            residual,
            converged,
            g_norm,
            l_norm,
            b_norm,
            surrogate_sum,
        };
        if contracting {
            return Ok((u, ulin, report));
        }
        last = Some(report);
        t_end -= 1.0;
    }
    let r = last.expect("at least one attempt");
    Err(Error::NonConvergence {
        iterations: r.differences.len(),
        detail: format!(
            "no admissible T down to {}: surrogate sum {:.3e}, ratios {:?}",
            r.t_end, r.surrogate_sum, r.ratios
        ),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinedDecay {
    /// `max_τ e^{−2aτ} ‖U^per(τ)‖_{H^{N-1}}`.
    pub weighted_max: f64,
    pub fit: GrowthFit,
    /// `‖U^per‖ / ‖U^lin‖` at the first and last sampled periods.
    pub ratio_start: f64,
    pub ratio_end: f64,
}

/// Indices sampled once per period of `U^lin` (all indices if `b = 0`),
/// starting at `first`.
pub fn period_samples(traj: &WeightedTrajectory, mode: &LinearMode, first: usize) -> Vec<usize> {
    match mode.period() {
        None => (first..traj.states.len()).collect(),
        Some(p) => {
            let mut out = Vec::new();
            let mut t = traj.tau(first);
            let last = traj.tau(traj.states.len() - 1);
            while t <= last + 1e-12 {
                let i = ((t - traj.tau0) / traj.dt).round() as usize;
                if i < traj.states.len() {
                    out.push(i);
                }
                t += p;
            }
            out
        }
    }
}

pub fn refined_decay(uper: &WeightedTrajectory, ulin: &WeightedTrajectory, mode: &LinearMode) -> Result<RefinedDecay> {
    let a = mode.a();
    let weighted_max = uper
        .norms
        .iter()
        .enumerate()
        .map(|(i, n)| (-2.0 * a * uper.tau(i)).exp() * n)
        .fold(0.0, f64::max);
    let taus = uper.taus();
    let start = taus[0] + 0.25 * (taus[taus.len() - 1] - taus[0]);
    let fit = fit_growth(&taus, &uper.norms, (start, f64::INFINITY))?;
    let ratio = |i: usize| uper.norms[i] / ulin.norms[i].max(1e-300);
    let n = uper.states.len();
    Ok(RefinedDecay { weighted_max, fit, ratio_start: ratio(n / 10), ratio_end: ratio(n - 1) })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRow {
    pub tau: f64,
    /// `‖(U_{k+1} − U_{k−1})/2dτ − rhs_k‖ / ‖rhs_k‖`.
    pub residual: f64,
    /// `dτ² ‖∂³U‖ / ‖rhs_k‖` from third differences: the size of the
    /// second-order truncation error.
    pub order_scale: f64,
}

/// Centred-difference check of `∂_τ U^per = A U^per − b(U, U)` at the given
/// interior steps.
pub fn consistency(ctx: &ManifoldContext, ulin: &WeightedTrajectory, uper: &WeightedTrajectory, steps: &[usize]) -> Vec<ConsistencyRow> {
    let w = ctx.grid.unknown_weights(Measure::Cylindrical);
    let norm = |v: &[f64]| v.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    let dt = uper.dt;
    steps
        .iter()
        .filter(|&&k| k >= 2 && k + 2 < uper.states.len())
        .map(|&k| {
            let s = &uper.states;
            let fd: Vec<f64> = s[k + 1].iter().zip(&s[k - 1]).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
            let rhs = ctx.rhs(ulin, uper, k);
            let diff: Vec<f64> = fd.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            let third: Vec<f64> = (0..fd.len())
                .map(|i| (s[k + 2][i] - 3.0 * s[k + 1][i] + 3.0 * s[k][i] - s[k - 1][i]) / dt.powi(3))
                .collect();
            let r = norm(&rhs).max(1e-300);
            ConsistencyRow { tau: uper.tau(k), residual: norm(&diff) / r, order_scale: dt * dt * norm(&third) / r }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{truncate, Family, VortexProfile};
    use crate::selfsim::{build_selfsim, rightmost, SelfSimSetup};
    use faer::Mat;

    const BETA: f64 = 100.0;

    fn setup() -> (SelfSimSetup, Mat<f64>, LinearMode) {
        let p = VortexProfile::new(Family::TailP2 { amp: 2.5, tail: 0.05, shield: 4.0, width: 1.0 }, 2).unwrap();
        let base = PolarGrid::new(40, 3, 5.0, None).unwrap();
        let t = truncate(&p, 4.0, &base.radial).unwrap();
        let ss = build_selfsim(&t, &base, 32.0).unwrap();
        let a = ss.parts.l_vor(BETA).unwrap();
        let pair = rightmost(&a).unwrap();
        let mode = LinearMode::new(pair.lambda, &pair.vector, &ss.parts.weights, pair.residual).unwrap();
        (ss, a, mode)
    }

    #[test]
    fn linear_mode_is_normalised_and_grows() {
        let (ss, _, mode) = setup();
        assert!(mode.a() > 0.0, "small grid lost the instability: {}", mode.lambda);
        let w = &ss.parts.weights;
        let norm: f64 = mode.eta.iter().zip(w).map(|(z, w)| w * z.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let big = mode.eta.iter().fold(c64::new(0.0, 0.0), |acc, z| if z.norm() > acc.norm() { *z } else { acc });
        assert!(big.im.abs() < 1e-12 && big.re > 0.0);
        let u0 = mode.at(0.0);
        let u1 = mode.at(mode.period().unwrap());
        let scale = (mode.a() * mode.period().unwrap()).exp();
        for (a, b) in u0.iter().zip(&u1) {
            assert!((b - scale * a).abs() < 1e-9 * scale);
        }
        assert!(LinearMode::new(c64::new(-0.1, 1.0), &mode.eta, w, 0.0).is_err());
        assert!(LinearMode::new(mode.lambda, &mode.eta, w, 1e-3).is_err());
    }

    #[test]
    fn duhamel_map_splits_into_its_pieces() {
        let (ss, a, mode) = setup();
        let prop = Propagator::new(a, 0.01).unwrap();
        let ctx = ManifoldContext { grid: &ss.grid, bs: &ss.biot_savart, prop: &prop, mode: &mode };
        let rate = 1.5 * mode.a();
        let ulin = build_ulin(&ctx, -1.0, 30, rate, 3).unwrap();
        let u = ctx.g(&ulin).unwrap().scaled(50.0, &ss.grid).unwrap();
        let whole = ctx.map(&ulin, &u).unwrap();
        let g = ctx.g(&ulin).unwrap();
        let l = ctx.l(&ulin, &u).unwrap();
        let b = ctx.b(&ulin, &u, &u).unwrap();
        let scale = whole.x_norm();
        assert!(scale > 0.0);
        let mut sum = g.clone();
        for (k, s) in sum.states.iter_mut().enumerate() {
            s.iter_mut().zip(&l.states[k]).zip(&b.states[k]).for_each(|((s, l), b)| *s += l + b);
        }
        let sum = WeightedTrajectory::new(&ss.grid, sum.tau0, sum.dt, sum.states, rate, 3).unwrap();
        assert!(whole.difference(&sum, &ss.grid).unwrap().x_norm() < 1e-10 * scale);

        let b2 = ctx.b(&ulin, &u.scaled(2.0, &ss.grid).unwrap(), &u.scaled(2.0, &ss.grid).unwrap()).unwrap();
        let b4 = b.scaled(4.0, &ss.grid).unwrap();
        assert!(b2.difference(&b4, &ss.grid).unwrap().x_norm() < 1e-10 * b4.x_norm());
        assert!(whole.norm_consistency(&ss.grid) < 1e-12);
    }

    #[test]
    fn nonlinearity_vanishes_on_zero_fields() {
        let (ss, _, mode) = setup();
        let nl = Nonlinear::new(&ss.grid, &ss.biot_savart);
        let zero = vec![0.0; mode.eta.len()];
        let eta: Vec<f64> = mode.eta.iter().map(|z| z.re).collect();
        assert!(nl.apply(&zero, &eta).iter().all(|v| *v == 0.0));
        assert!(nl.apply(&eta, &zero).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn period_samples_are_one_period_apart() {
        let (ss, a, mode) = setup();
        let prop = Propagator::new(a, 0.001).unwrap();
        let ctx = ManifoldContext { grid: &ss.grid, bs: &ss.biot_savart, prop: &prop, mode: &mode };
        let p = mode.period().unwrap();
        let steps = (3.5 * p / 0.001) as usize;
        let ulin = build_ulin(&ctx, 0.0, steps, mode.a(), 3).unwrap();
        let idx = period_samples(&ulin, &mode, 0);
        assert_eq!(idx.len(), 4);
        for w in idx.windows(2) {
            assert!(((w[1] - w[0]) as f64 * 0.001 - p).abs() <= 0.001);
        }
    }

    #[test]
    fn small_fixed_point_contracts_with_refined_decay() {
        let (ss, a, mode) = setup();
        let params = ManifoldParams::standard(mode.a(), 0.5);
        let dt = 2e-3;
        let (uper, ulin, report) = fixed_point(&ss.grid, &ss.biot_savart, &a, &mode, dt, &params).unwrap();
        assert!(report.converged);
        assert!(report.ratios.iter().all(|r| *r <= 0.5), "{:?}", report.ratios);
        assert!(report.surrogate_sum < 1.0);
        assert!(uper.x_norm() <= 1.0);
        let decay = refined_decay(&uper, &ulin, &mode).unwrap();
        assert!(decay.fit.exponent >= 2.0 * mode.a() - 0.1, "{} vs a = {}", decay.fit.exponent, mode.a());

        let prop = Propagator::new(a, dt).unwrap();
        let ctx = ManifoldContext { grid: &ss.grid, bs: &ss.biot_savart, prop: &prop, mode: &mode };
        let n = uper.states.len();
        for row in consistency(&ctx, &ulin, &uper, &[n / 4, n / 2, 3 * n / 4]) {
            assert!(row.residual <= row.order_scale, "{row:?}");
        }
    }

    #[test]
    fn delta_must_stay_below_the_growth_rate() {
        let (ss, a, mode) = setup();
        let mut params = ManifoldParams::standard(mode.a(), 0.5);
        params.delta = mode.a();
        assert!(matches!(
            fixed_point(&ss.grid, &ss.biot_savart, &a, &mode, 1e-2, &params),
            Err(Error::Precondition(_))
        ));
    }
}
