//! Linearised two-dimensional Euler operator around a radial vortex,
//! decomposed into angular Fourier modes.

use crate::error::{Error, Result};
use crate::numerics::linalg::{self, EigenPair, ShiftInvertOptions};
use crate::numerics::{contour_projection, ContourOptions, OperatorMatrix, RadialGrid};
use crate::profiles::{truncate, RadialVortex, TruncatedProfile, VortexProfile};
use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use serde::Serialize;

/// Inner-product weight on the radial grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `L²(ϱ dϱ)`.
    Plain,
    /// `L²(γ ϱ dϱ)` with `γ = 1` on `ϱ ≤ r_bar` and `γ ~ ⟨ϱ⟩^{100}` beyond.
    Gamma { r_bar: f64 },
}

/// The weight function `γ`: identically 1 on `|x| ≤ r_bar`, growing like
/// `|x|^{100}` outside.
pub fn gamma(rho: f64, r_bar: f64) -> f64 {
    let d = (rho - r_bar).max(0.0);
    (1.0 + d * d).powi(50)
}

impl Weight {
    pub fn nodal(&self, grid: &RadialGrid) -> Vec<f64> {
        match *self {
            Weight::Plain => grid.w_area.clone(),
            Weight::Gamma { r_bar } => grid
                .w_area
                .iter()
                .zip(&grid.rho)
                .map(|(w, &r)| w * gamma(r, r_bar))
                .collect(),
        }
    }
}

/// Matrix of `g ↦ f` solving `(∂ϱϱ + ϱ^{-1}∂ϱ − n²/ϱ²) f = g` with the
/// exterior decay closure `f′ + |n| f / ϱ = 0` at `ϱ_max`. The value of `g`
/// at the outer node is ignored.
pub fn stream_matrix(grid: &RadialGrid, n: i64) -> Mat<f64> {
    let len = grid.len();
    let nn = (n * n) as f64;
    let an = n.unsigned_abs() as f64;
    let mut l = Mat::<f64>::from_fn(len, len, |i, j| {
        let r = grid.rho[i];
        let mut v = grid.d2[(i, j)] + grid.d1[(i, j)] / r;
        if i == j {
            v -= nn / (r * r);
        }
        v
    });
    let last = len - 1;
    for j in 0..len {
        l[(last, j)] = grid.d1[(last, j)] + if j == last { an / grid.rho_max } else { 0.0 };
    }
    let mut rhs = Mat::<f64>::identity(len, len);
    rhs[(last, last)] = 0.0;
    l.partial_piv_lu().solve(&rhs)
}

/// Solve for the stream function of a single mode. Fails if `g` has not
/// decayed at the outer boundary.
pub fn solve_stream_mode(grid: &RadialGrid, n: i64, g: &[f64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("mode n = 0 carries no stream-function coupling"));
    }
    if g.len() != grid.len() {
        return Err(Error::invalid("field length does not match the grid"));
    }
    let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tail = g[g.len() - 1].abs();
    if tail > 1e-8 * gmax.max(1e-300) {
        return Err(Error::NonDecaying(tail));
    }
    let s = stream_matrix(grid, n);
    Ok(crate::numerics::radial::matvec(&s, g))
}

/// Assemble `A^{(n)} g = −i n ζ g + (i n / ϱ) ω̄′ f[g]` with parts
/// `advection` and `coupling`. Mode `n = 0` yields the zero operator.
pub fn mode_operator<V: RadialVortex>(v: &V, grid: &RadialGrid, n: i64, weight: Weight) -> OperatorMatrix {
    let len = grid.len();
    let weights = weight.nodal(grid);
    if n == 0 {
        return OperatorMatrix::from_parts(
            vec![
                ("advection".into(), Mat::zeros(len, len)),
                ("coupling".into(), Mat::zeros(len, len)),
            ],
            weights,
        );
    }
    let nf = n as f64;
    let zeta: Vec<f64> = grid.sample(|r| v.zeta(r));
    let wp: Vec<f64> = grid.sample(|r| v.omega_prime(r));
    let s = stream_matrix(grid, n);
    let adv = Mat::<c64>::from_fn(len, len, |i, j| {
        if i == j {
            c64::new(0.0, -nf * zeta[i])
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let cpl = Mat::<c64>::from_fn(len, len, |i, j| c64::new(0.0, nf * wp[i] / grid.rho[i] * s[(i, j)]));
    OperatorMatrix::from_parts(vec![("advection".into(), adv), ("coupling".into(), cpl)], weights)
}

/// Spectrum of one mode operator (dense), sorted by decreasing real part.
pub fn mode_spectrum(op: &OperatorMatrix) -> Result<Vec<EigenPair>> {
    linalg::dense_eigs(op.total.as_ref())
}

/// The rightmost eigenpair with `Re λ > threshold` that reappears on a
/// refined grid within `tol · max(|λ|, 1)`, if any.
pub fn rightmost_confirmed<V: RadialVortex>(
    v: &V,
    grid: &RadialGrid,
    refined: &RadialGrid,
    n: i64,
    threshold: f64,
    tol: f64,
) -> Result<Option<EigenPair>> {
    let op = mode_operator(v, grid, n, Weight::Plain);
    let spec = linalg::dense_eigenvalues(op.total.as_ref())?;
    let op_f = mode_operator(v, refined, n, Weight::Plain);
    let spec_f = linalg::dense_eigenvalues(op_f.total.as_ref())?;
    for lam in spec.iter().filter(|l| l.re > threshold) {
        let close = spec_f
            .iter()
            .map(|m| (m - lam).norm())
            .fold(f64::INFINITY, f64::min);
        if close <= tol * lam.norm().max(1.0) {
            let pairs = linalg::shift_invert(
                op.total.as_ref(),
                *lam + c64::new(1e-3 * lam.re.abs().max(1e-3), 0.0),
                1,
                ShiftInvertOptions::default(),
            )?;
            return Ok(pairs.into_iter().next());
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub n: i64,
    /// Truncation radius; `None` for the untruncated vortex.
    pub r_cut: Option<f64>,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

/// Rightmost eigenvalue of each `(n, R)` pair.
pub fn mode_spectrum_sweep(
    profile: &VortexProfile,
    grid: &RadialGrid,
    n_list: &[i64],
    r_list: &[Option<f64>],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &n in n_list {
        for &r in r_list {
            let op = match r {
                None => mode_operator(profile, grid, n, Weight::Plain),
                Some(rc) => mode_operator(&truncate(profile, rc, grid)?, grid, n, Weight::Plain),
            };
            let spec = mode_spectrum(&op)?;
            let top = &spec[0];
            rows.push(SweepRow { m: profile.m, n, r_cut: r, re: top.lambda.re, im: top.lambda.im, residual: top.residual });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationRow {
    pub r_cut: f64,
    pub re: f64,
    pub im: f64,
    pub distance: f64,
    pub residual: f64,
    pub riesz_rank: usize,
}

/// Track the unstable eigenvalue `λ_∞` of mode `n` through truncations.
/// Each `λ_R` is the eigenvalue of `A_R^{(n)}` nearest to `λ_∞`; the Riesz
/// projection is taken on the circle of radius `contour_radius` about `λ_∞`.
pub fn truncation_continuation(
    profile: &VortexProfile,
    grid: &RadialGrid,
    n: i64,
    lambda_inf: c64,
    r_list: &[f64],
    contour_radius: f64,
) -> Result<Vec<ContinuationRow>> {
    let mut rows = Vec::new();
    for &r in r_list {
        let t = truncate(profile, r, grid)?;
        let op = mode_operator(&t, grid, n, Weight::Plain);
        let spec = linalg::dense_eigs(op.total.as_ref())?;
        let near = spec
            .iter()
            .min_by(|a, b| (a.lambda - lambda_inf).norm().total_cmp(&(b.lambda - lambda_inf).norm()))
            .ok_or_else(|| Error::LinAlg("empty spectrum".into()))?;
        let proj = contour_projection(op.total.as_ref(), lambda_inf, contour_radius, ContourOptions::default())?;
        rows.push(ContinuationRow {
            r_cut: r,
            re: near.lambda.re,
            im: near.lambda.im,
            distance: (near.lambda - lambda_inf).norm(),
            residual: near.residual,
            riesz_rank: proj.report.rank,
        });
    }
    Ok(rows)
}

/// `‖A_R^{(n)} − A^{(n)}‖` on `L²(ϱ dϱ)` for each `R`.
pub fn operator_norm_convergence(
    profile: &VortexProfile,
    grid: &RadialGrid,
    n: i64,
    r_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let full = mode_operator(profile, grid, n, Weight::Plain);
    let mut out = Vec::new();
    for &r in r_list {
        let t: TruncatedProfile = truncate(profile, r, grid)?;
        let op = mode_operator(&t, grid, n, Weight::Plain);
        let diff = &op.total - &full.total;
        out.push((r, linalg::weighted_norm(diff.as_ref(), &full.weights)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchHit {
    pub m: usize,
    pub n: i64,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

/// Scan modes `n = k m` (`k = 1..`, `n ≤ n_max`) for confirmed unstable
/// eigenvalues and return the most unstable one.
pub fn instability_search(
    profile: &VortexProfile,
    grid: &RadialGrid,
    refined: &RadialGrid,
    n_max: i64,
    threshold: f64,
    tol: f64,
) -> Result<Option<SearchHit>> {
    let mut best: Option<SearchHit> = None;
    let m = profile.m as i64;
    let mut n = m;
    while n <= n_max {
        if let Some(p) = rightmost_confirmed(profile, grid, refined, n, threshold, tol)? {
            if best.as_ref().map(|b| p.lambda.re > b.re).unwrap_or(true) {
                best = Some(SearchHit { m: profile.m, n, re: p.lambda.re, im: p.lambda.im, residual: p.residual });
            }
        }
        n += m;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Mapping;
    use crate::profiles::Family;

    #[test]
    fn manufactured_stream_solution() {
        let grid = RadialGrid::new(96, 8.0, Mapping::Algebraic).unwrap();
        let g = grid.sample(|r| (4.0 * r.powi(3) - 8.0 * r) * (-r * r).exp());
        let f = solve_stream_mode(&grid, 1, &g).unwrap();
        let err = f
            .iter()
            .zip(&grid.rho)
            .map(|(f, r)| (f - r * (-r * r).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn non_decaying_input_rejected() {
        let grid = RadialGrid::new(32, 4.0, Mapping::Algebraic).unwrap();
        let g = vec![1.0; 32];
        assert!(matches!(solve_stream_mode(&grid, 2, &g), Err(Error::NonDecaying(_))));
    }

    #[test]
    fn advection_part_is_skew() {
        let p = VortexProfile::new(Family::Annulus { amp: 1.0, center: 1.0, width: 0.3 }, 2).unwrap();
        let grid = RadialGrid::new(48, 6.0, Mapping::Geometric).unwrap();
        let op = mode_operator(&p, &grid, 3, Weight::Plain);
        assert!(op.skew_defect("advection").unwrap() < 1e-12);
        assert!(op.parts_sum_gap() < 1e-14);
    }

    #[test]
    fn zero_mode_is_zero() {
        let p = VortexProfile::new(Family::Annulus { amp: 1.0, center: 1.0, width: 0.3 }, 2).unwrap();
        let grid = RadialGrid::new(32, 6.0, Mapping::Geometric).unwrap();
        let op = mode_operator(&p, &grid, 0, Weight::Plain);
        assert_eq!(op.norm(), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn negative_modes_are_conjugate(amp in 0.1f64..5.0, center in 0.5f64..2.0, width in 0.2f64..0.6, k in 1i64..4) {
            let p = VortexProfile::new(Family::Annulus { amp, center, width }, 2).unwrap();
            let grid = RadialGrid::new(24, 6.0, Mapping::Geometric).unwrap();
            let plus = mode_operator(&p, &grid, 2 * k, Weight::Plain);
            let minus = mode_operator(&p, &grid, -2 * k, Weight::Plain);
            for j in 0..grid.len() {
                for i in 0..grid.len() {
                    proptest::prop_assert_eq!(minus.total[(i, j)], plus.total[(i, j)].conj());
                }
            }
        }

        #[test]
        fn stream_solve_is_linear(c in -5.0f64..5.0, s1 in 0.5f64..2.0, s2 in 0.5f64..2.0, n in 1i64..5) {
            let grid = RadialGrid::new(48, 12.0, Mapping::Geometric).unwrap();
            let g1 = grid.sample(|r| r * (-s1 * r * r).exp());
            let g2 = grid.sample(|r| r * r * (-s2 * r * r).exp());
            let sum: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + c * b).collect();
            let (f1, f2, fs) = (
                solve_stream_mode(&grid, n, &g1).unwrap(),
                solve_stream_mode(&grid, n, &g2).unwrap(),
                solve_stream_mode(&grid, n, &sum).unwrap(),
            );
            let scale = fs.iter().chain(&f1).fold(1e-300f64, |a, v| a.max(v.abs()));
            for i in 0..grid.len() {
                proptest::prop_assert!((fs[i] - f1[i] - c * f2[i]).abs() <= 1e-12 * scale * (1.0 + c.abs()));
            }
        }
    }
}
