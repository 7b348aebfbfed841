//! Self-similar Navier-Stokes layer around the lifted ring: the vorticity
//! operator family `T_β = β⁻¹D + M + S + K`, the vorticity form
//! `L_vor = D + β(M + S + K) + ¼` of the linearised similarity operator,
//! BDF2 propagation of its semigroup and resolvent applications.
//!
//! The state is the swirl vorticity of an axisymmetric field without swirl
//! velocity, on the unknowns of a [`FieldGrid`]; inner products carry the
//! three-dimensional volume element `2π r dr dz`.

use crate::axisym::{skew_part, transport, Background, BiotSavart, StreamGrid};
use crate::error::{Error, Result};
use crate::numerics::linalg::{self, refine_eigenvalue, EigenPair, ShiftInvertOptions, ShiftedLu};
use crate::numerics::{weighted_norm, FieldGrid, Measure, OperatorMatrix, PolarGrid};
use crate::profiles::TruncatedProfile;
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat};
use serde::Serialize;
use std::f64::consts::PI;

/// Norms above this abort a propagation.
pub const OVERFLOW_GUARD: f64 = 1e150;

/// Real operator parts on the unknowns of one grid.
#[derive(Debug, Clone)]
pub struct SelfSimParts {
    /// Discrete vector Laplacian `Δ − r⁻²` (symmetric negative in the weights).
    pub lap: Mat<f64>,
    /// `D = Δ + ¾ + ½ ξ·∇`.
    pub d: Mat<f64>,
    pub m: Mat<f64>,
    pub s: Mat<f64>,
    pub k: Mat<f64>,
    /// `2π r` times the planar quadrature weight at each unknown.
    pub weights: Vec<f64>,
}

fn real_norm(m: &Mat<f64>, w: &[f64]) -> f64 {
    weighted_norm(linalg::to_complex(m.as_ref()).as_ref(), w)
}

fn axisym_ell<G: FieldGrid>(grid: &G) -> Result<f64> {
    grid.ell()
        .ok_or_else(|| Error::Precondition("the similarity layer needs a finite distance to the axis".into()))
}

/// `(Δ − r⁻², D)` on a grid: the Laplacian in symmetric weak form,
/// `−W⁻¹ Gᵀ W G − r⁻²`, and the drift `¾ + ½ ξ·∇` as the skew part of
/// `½ (ξ·∇ + 3/2)` in the volume weights, so that `D − Δ` is exactly skew.
pub fn dissipation<G: FieldGrid>(grid: &G) -> Result<(Mat<f64>, Mat<f64>)> {
    let ell = axisym_ell(grid)?;
    let nodes = grid.nodes();
    let unk = grid.unknown_nodes();
    let wf = grid.weights(Measure::Cylindrical);
    let w = grid.restrict(&wf);
    let (gx, gz) = grid.grad_matrices();
    let nu = unk.len();
    let sw: Vec<f64> = wf.iter().map(|v| v.sqrt()).collect();
    let gxw = Mat::<f64>::from_fn(gx.nrows(), nu, |p, q| sw[p] * gx[(p, q)]);
    let gzw = Mat::<f64>::from_fn(gz.nrows(), nu, |p, q| sw[p] * gz[(p, q)]);
    let stiff = gxw.transpose() * &gxw + gzw.transpose() * &gzw;
    let lap = Mat::<f64>::from_fn(nu, nu, |p, q| {
        let mut v = -stiff[(p, q)] / w[p];
        if p == q {
            let r = nodes[unk[p]].0 + ell;
            v -= 1.0 / (r * r);
        }
        v
    });
    let x = Mat::<f64>::from_fn(nu, nu, |p, q| {
        let (xx, z) = nodes[unk[p]];
        let mut v = (xx + ell) * gx[(unk[p], q)] + z * gz[(unk[p], q)];
        if p == q {
            v += 1.5;
        }
        v
    });
    let drift = skew_part(&x, &w);
    let d = &lap + drift * 0.5;
    Ok((lap, d))
}

impl SelfSimParts {
    /// Parts with `Ū = 0`.
    pub fn free<G: FieldGrid>(grid: &G) -> Result<Self> {
        let (lap, d) = dissipation(grid)?;
        let nu = grid.n_unknowns();
        Ok(Self {
            lap,
            d,
            m: Mat::zeros(nu, nu),
            s: Mat::zeros(nu, nu),
            k: Mat::zeros(nu, nu),
            weights: grid.unknown_weights(Measure::Cylindrical),
        })
    }

    /// Parts around the background `Ū = ũ_ℓ` with vorticity `Ω̄ = ω̃_ℓ`:
    /// `MΩ = −Ū·∇Ω` (skew part in the volume weights),
    /// `SΩ = (Ū^r Ω + U^r Ω̄)/r`, `KΩ = −U·∇Ω̄` with `U = BS[Ω]`.
    pub fn around<G: FieldGrid>(grid: &G, bg: &Background, bs: &BiotSavart) -> Result<Self> {
        let mut parts = Self::free(grid)?;
        let ell = axisym_ell(grid)?;
        let nodes = grid.nodes();
        let unk = grid.unknown_nodes();
        let nu = unk.len();
        let t = transport(grid, &bg.ux, &bg.uz);
        parts.m = skew_part(&t, &parts.weights) * -1.0;
        parts.s = Mat::<f64>::from_fn(nu, nu, |p, q| {
            let i = unk[p];
            let inv = 1.0 / (nodes[i].0 + ell);
            let mut v = bg.omega[i] * inv * bs.ux[(i, q)];
            if p == q {
                v += bg.ux[i] * inv;
            }
            v
        });
        parts.k = Mat::<f64>::from_fn(nu, nu, |p, q| {
            let i = unk[p];
            -bg.omega_x[i] * bs.ux[(i, q)] - bg.omega_z[i] * bs.uz[(i, q)]
        });
        Ok(parts)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `M + S + K`, the linearised Euler part.
    pub fn euler(&self) -> Mat<f64> {
        &self.m + &self.s + &self.k
    }

    /// `T_β = β⁻¹D + M + S + K`; `None` is `β = ∞`.
    pub fn t_beta(&self, beta: Option<f64>) -> Result<Mat<f64>> {
        match beta {
            None => Ok(self.euler()),
            Some(b) => {
                check_beta(b)?;
                Ok(&self.d * (1.0 / b) + self.euler())
            }
        }
    }

    /// `L_vor = D + β(M + S + K) + ¼`, assembled directly from the parts.
    pub fn l_vor(&self, beta: f64) -> Result<Mat<f64>> {
        check_beta(beta)?;
        let n = self.dim();
        Ok(Mat::from_fn(n, n, |i, j| {
            let mut v = self.d[(i, j)] + beta * self.m[(i, j)] + beta * self.s[(i, j)] + beta * self.k[(i, j)];
            if i == j {
                v += 0.25;
            }
            v
        }))
    }

    /// `max |T_β − β⁻¹(L_vor − ¼)|` relative to `max |T_β|`.
    pub fn identity_gap(&self, beta: f64) -> Result<f64> {
        let t = self.t_beta(Some(beta))?;
        let l = self.l_vor(beta)?;
        let n = self.dim();
        let mut gap = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let quarter = if i == j { 0.25 } else { 0.0 };
                gap = gap.max((t[(i, j)] - (l[(i, j)] - quarter) / beta).abs());
                scale = scale.max(t[(i, j)].abs());
            }
        }
        Ok(gap / scale.max(1e-300))
    }

    /// `μ = ‖S‖` in the volume-weighted space.
    pub fn mu(&self) -> f64 {
        real_norm(&self.s, &self.weights)
    }

    /// `‖X + X*‖ / ‖X‖` for `X = D − Δ`.
    pub fn drift_skew_defect(&self) -> f64 {
        let x = &self.d - &self.lap;
        let n = self.dim();
        let w = &self.weights;
        let sym = Mat::<f64>::from_fn(n, n, |i, j| x[(i, j)] + x[(j, i)] * w[j] / w[i]);
        real_norm(&sym, w) / real_norm(&x, w).max(1e-300)
    }

    /// `T_β` as a complex operator with parts `D` (already scaled by
    /// `β⁻¹`), `M`, `S`, `K`.
    pub fn operator(&self, beta: Option<f64>) -> Result<OperatorMatrix> {
        let c = |m: &Mat<f64>| linalg::to_complex(m.as_ref());
        let mut parts = Vec::new();
        if let Some(b) = beta {
            check_beta(b)?;
            parts.push(("D".to_string(), c(&(&self.d * (1.0 / b)))));
        }
        parts.push(("M".into(), c(&self.m)));
        parts.push(("S".into(), c(&self.s)));
        parts.push(("K".into(), c(&self.k)));
        Ok(OperatorMatrix::from_parts(parts, self.weights.clone()))
    }

    /// Operator bound `β ‖M + S + K‖` of the advective part. It is dominated
    /// by the finest radial spacing and far exceeds the rate of the flow
    /// itself; see [`cfl_rate`].
    pub fn advective_rate(&self, beta: f64) -> f64 {
        beta * real_norm(&self.euler(), &self.weights)
    }
}

/// Local advective rate on a polar grid,
/// `β max (|Ū_ϱ| / Δϱ_i + |Ū_θ| / (ϱ_i Δθ))`, with `Δϱ_i` the smaller gap
/// to the neighbouring radial nodes.
pub fn cfl_rate(grid: &PolarGrid, bg: &Background, beta: f64) -> f64 {
    let rho = &grid.radial.rho;
    let nr = rho.len();
    let dth = 2.0 * PI / grid.n_theta as f64;
    let mut rate = 0.0f64;
    for i in 0..nr {
        let below = if i > 0 { rho[i] - rho[i - 1] } else { rho[i] };
        let above = if i + 1 < nr { rho[i + 1] - rho[i] } else { below };
        let dr = below.min(above);
        for (j, th) in grid.theta.iter().enumerate() {
            let k = grid.index(i, j);
            let (c, s) = (th.cos(), th.sin());
            let ur = c * bg.ux[k] + s * bg.uz[k];
            let ut = -s * bg.ux[k] + c * bg.uz[k];
            rate = rate.max(ur.abs() / dr + ut.abs() / (rho[i] * dth));
        }
    }
    beta * rate
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("amplitude beta must be positive, got {beta}")))
    }
}

/// Everything for the similarity layer at one ring offset.
pub struct SelfSimSetup {
    pub grid: PolarGrid,
    pub background: Background,
    pub biot_savart: BiotSavart,
    pub parts: SelfSimParts,
    pub mu: f64,
}

pub fn build_selfsim(t: &TruncatedProfile, base: &PolarGrid, ell: f64) -> Result<SelfSimSetup> {
    let grid = base.with_ell(Some(ell))?;
    let background = crate::axisym::lift_background(t, &grid)?;
    let biot_savart = grid.biot_savart()?;
    let parts = SelfSimParts::around(&grid, &background, &biot_savart)?;
    let mu = parts.mu();
    Ok(SelfSimSetup { grid, background, biot_savart, parts, mu })
}

/// Rightmost eigenpair of a real operator, refined. Of a conjugate pair the
/// member with `Im λ ≥ 0` is returned.
pub fn rightmost(a: &Mat<f64>) -> Result<EigenPair> {
    let c = linalg::to_complex(a.as_ref());
    let ev = linalg::dense_eigenvalues(c.as_ref())?;
    let first = *ev.first().ok_or_else(|| Error::LinAlg("empty spectrum".into()))?;
    let first = if first.im < 0.0 { first.conj() } else { first };
    refine_eigenvalue(c.as_ref(), first, 4)
}

/// Eigenpair of a real operator nearest `guess`, refined.
pub fn nearest(a: &Mat<f64>, guess: c64) -> Result<EigenPair> {
    let c = linalg::to_complex(a.as_ref());
    let shift = guess + c64::new(1e-3 * guess.norm().max(1e-2), 0.0);
    let pair = linalg::shift_invert(c.as_ref(), shift, 1, ShiftInvertOptions::default())?
        .into_iter()
        .next()
        .ok_or_else(|| Error::NonConvergence { iterations: 0, detail: "no eigenpair returned".into() })?;
    let refined = refine_eigenvalue(c.as_ref(), pair.lambda, 4)?;
    Ok(if refined.residual <= pair.residual { refined } else { pair })
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaRow {
    pub beta: f64,
    pub re: f64,
    pub im: f64,
    /// `βλ_β + ¼`.
    pub tilde_re: f64,
    pub tilde_im: f64,
    /// Rightmost eigenvalue of the directly assembled `L_vor`.
    pub direct_re: f64,
    pub direct_im: f64,
    pub identity_gap: f64,
    /// `|λ_β − λ_∞|`.
    pub distance: f64,
    pub residual: f64,
}

/// Follow `λ_∞` of `T_∞` to finite `β`, from the largest `β` down.
pub fn beta_continuation(parts: &SelfSimParts, betas: &[f64], lambda_inf: c64, mu: f64) -> Result<Vec<BetaRow>> {
    if lambda_inf.re <= mu {
        return Err(Error::Precondition(format!(
            "Re lambda_inf = {} does not exceed mu = {mu}",
            lambda_inf.re
        )));
    }
    let mut order: Vec<f64> = betas.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let mut guess = lambda_inf;
    let mut rows = Vec::new();
    for beta in order {
        let pair = nearest(&parts.t_beta(Some(beta))?, guess)?;
        guess = pair.lambda;
        let tilde = pair.lambda * beta + 0.25;
        let direct = rightmost(&parts.l_vor(beta)?)?.lambda;
        rows.push(BetaRow {
            beta,
            re: pair.lambda.re,
            im: pair.lambda.im,
            tilde_re: tilde.re,
            tilde_im: tilde.im,
            direct_re: direct.re,
            direct_im: direct.im,
            identity_gap: (direct - tilde).norm(),
            distance: (pair.lambda - lambda_inf).norm(),
            residual: pair.residual,
        });
    }
    rows.reverse();
    Ok(rows)
}

/// Solution of `(λ − A) x = w`.
pub fn resolvent_apply(a: &Mat<f64>, lambda: c64, w: &[c64]) -> Result<Vec<c64>> {
    let lu = ShiftedLu::new(linalg::to_complex(a.as_ref()).as_ref(), lambda);
    if lu.min_pivot_ratio < 1e-13 {
        return Err(Error::SingularShift(format!("{lambda}")));
    }
    Ok(lu.solve_vec(w).into_iter().map(|v| -v).collect())
}

/// `‖(λ − A)⁻¹‖` in the weights `w`.
pub fn resolvent_norm(a: &Mat<f64>, lambda: c64, w: &[f64]) -> Result<f64> {
    let n = a.nrows();
    let lu = ShiftedLu::new(linalg::to_complex(a.as_ref()).as_ref(), lambda);
    if lu.min_pivot_ratio < 1e-13 {
        return Err(Error::SingularShift(format!("{lambda}")));
    }
    let inv = lu.solve_mat(Mat::<c64>::identity(n, n).as_ref());
    Ok(weighted_norm(inv.as_ref(), w))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventCheck {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub norm: f64,
    /// `(Re λ − μ)⁻¹`.
    pub bound: f64,
}

/// `‖R(λ, β⁻¹D + M + S)‖` against `(Re λ − μ)⁻¹` at each probe.
pub fn resolvent_bound_checks(parts: &SelfSimParts, beta: f64, mu: f64, probes: &[c64]) -> Result<Vec<ResolventCheck>> {
    check_beta(beta)?;
    let a = &parts.d * (1.0 / beta) + &parts.m + &parts.s;
    probes
        .iter()
        .map(|&lambda| {
            if lambda.re <= mu {
                return Err(Error::Precondition(format!("probe {lambda} is not right of mu = {mu}")));
            }
            Ok(ResolventCheck {
                lambda_re: lambda.re,
                lambda_im: lambda.im,
                norm: resolvent_norm(&a, lambda, &parts.weights)?,
                bound: 1.0 / (lambda.re - mu),
            })
        })
        .collect()
}

/// BDF2 integrator for `u′ = A u + f(τ)`, with a single backward Euler
/// start step.
pub struct Propagator {
    pub a: Mat<f64>,
    pub dt: f64,
    lu1: PartialPivLu<f64>,
    lu2: PartialPivLu<f64>,
}

fn solve_real(lu: &PartialPivLu<f64>, b: &[f64]) -> Vec<f64> {
    let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

impl Propagator {
    pub fn new(a: Mat<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let n = a.nrows();
        let shifted = |c: f64| Mat::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - c * a[(i, j)]);
        let lu1 = shifted(dt).partial_piv_lu();
        let lu2 = shifted(2.0 * dt / 3.0).partial_piv_lu();
        Ok(Self { a, dt, lu1, lu2 })
    }

    /// With an advective CFL guard `dt · rate ≤ cfl_max`.
    pub fn guarded(a: Mat<f64>, dt: f64, rate: f64, cfl_max: f64) -> Result<Self> {
        if dt * rate > cfl_max {
            return Err(Error::Cfl(format!("dt * rate = {:.3} exceeds {cfl_max}", dt * rate)));
        }
        Self::new(a, dt)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// One step from `u` (and `prev`, the state one step earlier, if any)
    /// with forcing `f` evaluated at the new time.
    pub fn step(&self, u: &[f64], prev: Option<&[f64]>, f: Option<&[f64]>) -> Vec<f64> {
        match prev {
            None => {
                let mut rhs = u.to_vec();
                if let Some(f) = f {
                    rhs.iter_mut().zip(f).for_each(|(r, f)| *r += self.dt * f);
                }
                solve_real(&self.lu1, &rhs)
            }
            Some(p) => {
                let c = 2.0 * self.dt / 3.0;
                let mut rhs: Vec<f64> = u.iter().zip(p).map(|(u, p)| (4.0 * u - p) / 3.0).collect();
                if let Some(f) = f {
                    rhs.iter_mut().zip(f).for_each(|(r, f)| *r += c * f);
                }
                solve_real(&self.lu2, &rhs)
            }
        }
    }

    /// March `steps` steps from `u0` at `tau0`. `forcing(n)` is the forcing
    /// at `tau0 + n dt`. Returns every state including the initial one.
    pub fn march<F>(&self, u0: &[f64], steps: usize, mut forcing: Option<F>) -> Result<Vec<Vec<f64>>>
    where
        F: FnMut(usize) -> Vec<f64>,
    {
        let mut states = vec![u0.to_vec()];
        for n in 0..steps {
            let f = forcing.as_mut().map(|g| g(n + 1));
            let prev = if n == 0 { None } else { Some(states[n - 1].as_slice()) };
            let next = self.step(&states[n], prev, f.as_deref());
            let big = next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !big.is_finite() || big > OVERFLOW_GUARD {
                return Err(Error::Overflow(self.dt * (n + 1) as f64));
            }
            states.push(next);
        }
        Ok(states)
    }
}

/// `(‖Ω‖_{L²}, ‖Ω‖_{H¹}, ‖Ω‖_{H²})` in the volume measure.
pub fn norm_ladder<G: FieldGrid>(grid: &G, u: &[f64]) -> [f64; 3] {
    let f = grid.embed(u);
    [
        grid.sobolev(&f, 0, Measure::Cylindrical),
        grid.sobolev(&f, 1, Measure::Cylindrical),
        grid.sobolev(&f, 2, Measure::Cylindrical),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub tau: Vec<f64>,
    #[serde(skip)]
    pub fields: Vec<Vec<f64>>,
    pub norms: Vec<[f64; 3]>,
    pub dt: f64,
    pub order: usize,
}

impl Trajectory {
    pub fn from_states<G: FieldGrid>(grid: &G, tau0: f64, dt: f64, states: Vec<Vec<f64>>, stride: usize) -> Self {
        let stride = stride.max(1);
        let last = states.len() - 1;
        let keep: Vec<usize> = (0..states.len()).filter(|i| i % stride == 0 || *i == last).collect();
        let tau = keep.iter().map(|&i| tau0 + dt * i as f64).collect();
        let mut fields = Vec::with_capacity(keep.len());
        let mut all = states;
        for &i in keep.iter().rev() {
            fields.push(std::mem::take(&mut all[i]));
        }
        fields.reverse();
        let norms = fields.iter().map(|f| norm_ladder(grid, f)).collect();
        Self { tau, fields, norms, dt, order: 2 }
    }

    /// Largest relative deviation of stored norms from a recomputation.
    pub fn norm_consistency<G: FieldGrid>(&self, grid: &G) -> f64 {
        self.fields
            .iter()
            .zip(&self.norms)
            .map(|(f, n)| {
                let m = norm_ladder(grid, f);
                (0..3).map(|k| (m[k] - n[k]).abs() / n[k].max(1e-300)).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn l2(&self) -> Vec<f64> {
        self.norms.iter().map(|n| n[0]).collect()
    }
}

/// Propagate `u0` under `prop` for `steps` steps starting at `tau0`.
pub fn propagate<G: FieldGrid>(grid: &G, prop: &Propagator, u0: &[f64], tau0: f64, steps: usize, stride: usize) -> Result<Trajectory> {
    if u0.len() != prop.dim() {
        return Err(Error::invalid("initial field does not match the operator"));
    }
    let states = prop.march::<fn(usize) -> Vec<f64>>(u0, steps, None)?;
    Ok(Trajectory::from_states(grid, tau0, prop.dt, states, stride))
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS deviation of `log‖U‖` from the fitted line.
    pub residual: f64,
    pub window: (f64, f64),
}

/// Least-squares fit of `log y = log C + s τ` over `τ ∈ window`.
pub fn fit_growth(tau: &[f64], y: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    let pts: Vec<(f64, f64)> = tau
        .iter()
        .zip(y)
        .filter(|(t, v)| **t >= window.0 && **t <= window.1 && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Precondition(format!("growth window {window:?} holds {} samples", pts.len())));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let s = sxy / sxx;
    let c = my - s * mt;
    let residual = (pts.iter().map(|p| (p.1 - c - s * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(GrowthFit { exponent: s, prefactor: c.exp(), residual, window })
}

/// `max τ^{1/2} ‖Ω(τ)‖_{H¹} / ‖Ω(0)‖_{L²}` over `0 < τ − τ_0 ≤ horizon`.
pub fn smoothing_ratio(traj: &Trajectory, horizon: f64) -> f64 {
    let t0 = traj.tau[0];
    let n0 = traj.norms[0][0];
    traj.tau
        .iter()
        .zip(&traj.norms)
        .filter(|(t, _)| **t > t0 && **t - t0 <= horizon)
        .map(|(t, n)| (t - t0).sqrt() * n[1] / n0)
        .fold(0.0, f64::max)
}

/// Largest violation of the discrete energy inequality
/// `½ d‖Ω‖²/dτ + β⁻¹(‖∇Ω‖² + ‖Ω/r‖²) ≤ μ‖Ω‖²` along `states`, relative to
/// `μ‖Ω‖²`. Uses `‖∇Ω‖² + ‖Ω/r‖² = −⟨ΔΩ, Ω⟩`.
pub fn energy_inequality_defect(parts: &SelfSimParts, beta: f64, mu: f64, states: &[Vec<f64>], dt: f64) -> f64 {
    let w = &parts.weights;
    let ip = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(w).map(|((a, b), w)| a * b * w).sum::<f64>();
    let mut worst = f64::NEG_INFINITY;
    for pair in states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mid: Vec<f64> = a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect();
        let rate = 0.5 * (ip(b, b) - ip(a, a)) / dt;
        let diss = -ip(&matvec(&parts.lap, &mid), &mid) / beta;
        let e = ip(&mid, &mid);
        worst = worst.max((rate + diss - mu * e) / (mu * e).max(1e-300));
    }
    worst
}

/// Laplace-transform evaluation of `(λ − A)⁻¹ w = ∫_0^∞ e^{−λs} e^{sA} w ds`
/// for real `λ`: BDF2 on `v′ = (A − λ)v` with trapezoid quadrature up to
/// `s_end`.
pub fn laplace_resolvent(a: &Mat<f64>, lambda: f64, w: &[f64], dt: f64, s_end: f64) -> Result<Vec<f64>> {
    let n = a.nrows();
    let shifted = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)] - if i == j { lambda } else { 0.0 });
    let prop = Propagator::new(shifted, dt)?;
    let steps = (s_end / dt).ceil() as usize;
    let states = prop.march::<fn(usize) -> Vec<f64>>(w, steps, None)?;
    let mut x = vec![0.0; n];
    for (i, s) in states.iter().enumerate() {
        let c = if i == 0 || i == steps { 0.5 * dt } else { dt };
        x.iter_mut().zip(s).for_each(|(x, s)| *x += c * s);
    }
    Ok(x)
}

/// Similarity form of the heat flow of the swirl vorticity
/// `ω = r (t + c)^{−5/2} exp(−|x|²/4(t + c))`, as `Ω(ξ, τ) = t ω(√t ξ, t)`
/// with `t = e^τ`.
pub fn heat_mode(r: f64, z: f64, tau: f64, c: f64) -> f64 {
    let t = tau.exp();
    let s = t + c;
    t * t.sqrt() * r * s.powf(-2.5) * (-t * (r * r + z * z) / (4.0 * s)).exp()
}

/// Exact `‖Ω(τ)‖_{L²(ℝ³)}` of [`heat_mode`].
pub fn heat_mode_norm(tau: f64, c: f64) -> f64 {
    let t = tau.exp();
    let s = t + c;
    let alpha = t / (4.0 * s);
    let integral = (1.0 / (2.0 * alpha)) * (PI / (2.0 * alpha)).powf(1.5);
    (t.powi(3) * s.powi(-5) * integral).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatCheck {
    pub tau: f64,
    pub numeric: f64,
    pub exact: f64,
    pub rel_error: f64,
}

/// Free propagation (`Ū = 0`) of [`heat_mode`] on `grid` compared with the
/// closed form.
pub fn free_heat_check<G: FieldGrid>(grid: &G, c: f64, tau_end: f64, dt: f64, samples: usize) -> Result<Vec<HeatCheck>> {
    let ell = axisym_ell(grid)?;
    let parts = SelfSimParts::free(grid)?;
    let n = parts.dim();
    let a = Mat::<f64>::from_fn(n, n, |i, j| parts.d[(i, j)] + if i == j { 0.25 } else { 0.0 });
    let prop = Propagator::new(a, dt)?;
    let u0 = grid.restrict(&grid.sample(|x, z| heat_mode(x + ell, z, 0.0, c)));
    let steps = (tau_end / dt).round() as usize;
    let stride = (steps / samples.max(1)).max(1);
    let traj = propagate(grid, &prop, &u0, 0.0, steps, stride)?;
    Ok(traj
        .tau
        .iter()
        .zip(&traj.norms)
        .map(|(&tau, n)| {
            let exact = heat_mode_norm(tau, c);
            HeatCheck { tau, numeric: n[0], exact, rel_error: (n[0] - exact).abs() / exact }
        })
        .collect())
}

/// `‖Ω‖_{L¹}` and the velocity `L²` norm over the grid, both in the volume
/// measure, for a real field at the unknowns.
pub fn integrability<G: FieldGrid>(grid: &G, bs: &BiotSavart, omega: &[f64]) -> (f64, f64) {
    let w = grid.unknown_weights(Measure::Cylindrical);
    let l1 = omega.iter().zip(&w).map(|(o, w)| o.abs() * w).sum();
    let (ux, uz) = bs.velocity(omega);
    let wf = grid.weights(Measure::Cylindrical);
    let l2 = ux.iter().zip(&uz).zip(&wf).map(|((a, b), w)| w * (a * a + b * b)).sum::<f64>().sqrt();
    (l1, l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{truncate, Family, VortexProfile};
    use proptest::prelude::*;

    fn setup() -> SelfSimSetup {
        let p = VortexProfile::new(Family::TailP2 { amp: 2.5, tail: 0.05, shield: 4.0, width: 1.0 }, 2).unwrap();
        let base = PolarGrid::new(40, 3, 5.0, None).unwrap();
        let t = truncate(&p, 4.0, &base.radial).unwrap();
        build_selfsim(&t, &base, 32.0).unwrap()
    }

    #[test]
    fn vorticity_form_matches_the_beta_family() {
        let ss = setup();
        assert!(ss.parts.drift_skew_defect() < 1e-10);
        for beta in [10.0, 1e2, 1e4] {
            assert!(ss.parts.identity_gap(beta).unwrap() < 1e-14);
        }
        let beta = 10.0;
        let t = rightmost(&ss.parts.t_beta(Some(beta)).unwrap()).unwrap().lambda;
        let l = rightmost(&ss.parts.l_vor(beta).unwrap()).unwrap().lambda;
        let tilde = t * beta + 0.25;
        assert!((l - tilde).norm() < 1e-8 * l.norm().max(1.0), "{l} vs {tilde}");
    }

    #[test]
    fn nonpositive_beta_is_rejected() {
        let ss = setup();
        assert!(ss.parts.t_beta(Some(0.0)).is_err());
        assert!(ss.parts.l_vor(-1.0).is_err());
    }

    #[test]
    fn resolvent_of_zero_operator_scales() {
        let a = Mat::<f64>::zeros(3, 3);
        let w = vec![c64::new(1.0, 0.0), c64::new(-2.0, 0.5), c64::new(0.0, 3.0)];
        let x = resolvent_apply(&a, c64::new(2.0, 0.0), &w).unwrap();
        for (x, w) in x.iter().zip(&w) {
            assert!((x - w * 0.5).norm() < 1e-15);
        }
        assert!(resolvent_apply(&a, c64::new(0.0, 0.0), &w).is_err());
    }

    #[test]
    fn dissipative_resolvent_respects_the_spectral_bound() {
        let ss = setup();
        let probes = [c64::new(ss.mu + 0.5, 0.0), c64::new(ss.mu + 1.0, 0.5)];
        for r in resolvent_bound_checks(&ss.parts, 100.0, ss.mu, &probes).unwrap() {
            assert!(r.norm <= r.bound * (1.0 + 1e-6), "{} > {}", r.norm, r.bound);
        }
        assert!(resolvent_bound_checks(&ss.parts, 100.0, ss.mu, &[c64::new(ss.mu, 0.0)]).is_err());
    }

    #[test]
    fn laplace_transform_reproduces_the_resolvent() {
        let a = Mat::<f64>::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => -1.0,
            (1, 1) => -2.0,
            (2, 2) => -0.5,
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            (1, 2) => 0.3,
            _ => 0.0,
        });
        let w = [1.0, 0.5, -0.25];
        let lambda = 0.5;
        let x = laplace_resolvent(&a, lambda, &w, 1e-3, 40.0).unwrap();
        let wc: Vec<c64> = w.iter().map(|v| c64::new(*v, 0.0)).collect();
        let exact = resolvent_apply(&a, c64::new(lambda, 0.0), &wc).unwrap();
        for (x, e) in x.iter().zip(&exact) {
            assert!((x - e.re).abs() < 1e-5, "{x} vs {e}");
        }
    }

    #[test]
    fn bdf2_is_second_order_and_exact_for_linear_forcing() {
        let a = Mat::<f64>::from_fn(1, 1, |_, _| -1.0);
        let err = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let s = Propagator::new(a.clone(), dt).unwrap().march::<fn(usize) -> Vec<f64>>(&[1.0], steps, None).unwrap();
            (s[steps][0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.01) / err(0.005);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");

        let zero = Mat::<f64>::zeros(1, 1);
        let prop = Propagator::new(zero, 0.1).unwrap();
        let s = prop.march(&[0.0], 10, Some(|_| vec![2.0])).unwrap();
        assert!((s[10][0] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cfl_guard_and_bad_steps_are_rejected() {
        let a = Mat::<f64>::zeros(2, 2);
        assert!(matches!(Propagator::guarded(a.clone(), 0.1, 1000.0, 50.0), Err(Error::Cfl(_))));
        assert!(Propagator::guarded(a.clone(), 0.01, 1000.0, 50.0).is_ok());
        assert!(Propagator::new(a, 0.0).is_err());
    }

    #[test]
    fn heat_mode_norm_matches_quadrature() {
        let (tau, c) = (0.7, 0.25);
        let h = 0.01;
        let mut sum = 0.0;
        for i in 1..1200 {
            let r = i as f64 * h;
            for j in -1200..=1200 {
                let z = j as f64 * h;
                sum += 2.0 * PI * r * heat_mode(r, z, tau, c).powi(2) * h * h;
            }
        }
        let exact = heat_mode_norm(tau, c);
        assert!((sum.sqrt() - exact).abs() < 1e-8 * exact, "{} vs {exact}", sum.sqrt());
    }

    proptest! {
        #[test]
        fn growth_fit_recovers_exponentials(s in -2.0f64..2.0, c in 0.01f64..100.0) {
            let tau: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
            let y: Vec<f64> = tau.iter().map(|t| c * (s * t).exp()).collect();
            let fit = fit_growth(&tau, &y, (1.0, 4.0)).unwrap();
            prop_assert!((fit.exponent - s).abs() < 1e-10);
            prop_assert!((fit.prefactor / c - 1.0).abs() < 1e-9);
        }

        #[test]
        fn propagation_is_linear(x in proptest::collection::vec(-1.0f64..1.0, 3), y in proptest::collection::vec(-1.0f64..1.0, 3), k in -3.0f64..3.0) {
            let a = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { -1.0 } else { 0.3 * (i as f64 - j as f64) });
            let prop = Propagator::new(a, 0.05).unwrap();
            let run = |u: &[f64]| prop.march::<fn(usize) -> Vec<f64>>(u, 5, None).unwrap().pop().unwrap();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + k * b).collect();
            let (rx, ry, rc) = (run(&x), run(&y), run(&combo));
            for i in 0..3 {
                prop_assert!((rc[i] - rx[i] - k * ry[i]).abs() < 1e-12);
            }
        }
    }
}
