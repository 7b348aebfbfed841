//! Dense eigensolvers, shift-invert Arnoldi and contour-integral spectral
//! projection on top of faer.

use crate::error::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const SEED: u64 = 0x5eed_2d3d;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: c64,
    pub vector: Vec<c64>,
    /// `‖A v - λ v‖ / ‖v‖` in the Euclidean norm.
    pub residual: f64,
}

fn cabs(z: c64) -> f64 {
    z.norm()
}

pub fn vnorm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn matvec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let n = a.nrows();
    let mut y = vec![c64::new(0.0, 0.0); n];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for i in 0..n {
            y[i] += col[i] * xj;
        }
    }
    y
}

fn col_of(m: MatRef<'_, c64>, j: usize) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

fn residual(a: MatRef<'_, c64>, lambda: c64, v: &[c64]) -> f64 {
    let av = matvec(a, v);
    let r: f64 = av
        .iter()
        .zip(v)
        .map(|(x, y)| (x - lambda * y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    r / vnorm(v)
}

/// Full dense eigendecomposition, sorted by decreasing real part.
pub fn dense_eigs(a: MatRef<'_, c64>) -> Result<Vec<EigenPair>> {
    let e = a
        .eigen()
        .map_err(|e| Error::LinAlg(format!("dense eigendecomposition failed: {e:?}")))?;
    let s = e.S().column_vector();
    let u = e.U();
    let mut out: Vec<EigenPair> = (0..s.nrows())
        .map(|j| {
            let v = col_of(u, j);
            let lambda = s[j];
            EigenPair { residual: residual(a, lambda, &v), lambda, vector: v }
        })
        .collect();
    sort_by_real_desc(&mut out);
    Ok(out)
}

/// Eigenvalues only, sorted by decreasing real part.
pub fn dense_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<c64>> {
    let mut ev = a
        .eigenvalues()
        .map_err(|e| Error::LinAlg(format!("dense eigenvalues failed: {e:?}")))?;
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(ev)
}

fn sort_by_real_desc(v: &mut [EigenPair]) {
    v.sort_by(|x, y| {
        y.lambda
            .re
            .total_cmp(&x.lambda.re)
            .then(y.lambda.im.total_cmp(&x.lambda.im))
    });
}

/// LU factorisation of `A - z I` with a singularity check on the pivots.
pub struct ShiftedLu {
    lu: PartialPivLu<c64>,
    pub min_pivot_ratio: f64,
}

impl ShiftedLu {
    pub fn new(a: MatRef<'_, c64>, z: c64) -> Self {
        let n = a.nrows();
        let shifted = Mat::<c64>::from_fn(n, n, |i, j| if i == j { a[(i, j)] - z } else { a[(i, j)] });
        let lu = shifted.partial_piv_lu();
        let u = lu.U();
        let mut mn = f64::INFINITY;
        let mut mx = 0.0f64;
        for i in 0..n {
            let p = cabs(u[(i, i)]);
            mn = mn.min(p);
            mx = mx.max(p);
        }
        Self { lu, min_pivot_ratio: if mx > 0.0 { mn / mx } else { 0.0 } }
    }

    pub fn solve_vec(&self, b: &[c64]) -> Vec<c64> {
        let rhs = Mat::<c64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        col_of(x.as_ref(), 0)
    }

    pub fn solve_mat(&self, b: MatRef<'_, c64>) -> Mat<c64> {
        self.lu.solve(b)
    }

    /// Solve with the conjugate transpose `(A - zI)^H`.
    pub fn solve_adjoint_vec(&self, b: &[c64]) -> Vec<c64> {
        let rhs = Mat::<c64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve_adjoint(&rhs);
        col_of(x.as_ref(), 0)
    }
}

/// Polish an eigenvalue estimate: inverse iteration from `guess` on both
/// sides, then the two-sided Rayleigh quotient `yᴴAx / yᴴx`, whose error is
/// quadratic in the eigenvector errors even for non-normal `A`.
pub fn refine_eigenvalue(a: MatRef<'_, c64>, guess: c64, iterations: usize) -> Result<EigenPair> {
    let n = a.nrows();
    let shift = guess + c64::new(1e-9 * guess.norm().max(1.0), 0.0);
    let lu = ShiftedLu::new(a, shift);
    if lu.min_pivot_ratio < 1e-300 {
        return Err(Error::SingularShift(format!("{shift}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut x = random_vector(n, &mut rng);
    let mut y = random_vector(n, &mut rng);
    for _ in 0..iterations.max(1) {
        x = lu.solve_vec(&x);
        let nx = vnorm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        y = lu.solve_adjoint_vec(&y);
        let ny = vnorm(&y);
        y.iter_mut().for_each(|v| *v /= ny);
    }
    let ax = matvec(a, &x);
    let lambda = dot(&y, &ax) / dot(&y, &x);
    Ok(EigenPair { residual: residual(a, lambda, &x), lambda, vector: x })
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<c64> {
    (0..n)
        .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Options for [`shift_invert`].
#[derive(Debug, Clone, Copy)]
pub struct ShiftInvertOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Residual tolerance relative to `max(1, |λ|)`.
    pub tol: f64,
}

impl Default for ShiftInvertOptions {
    fn default() -> Self {
        Self { krylov_dim: 40, max_restarts: 12, tol: 1e-9 }
    }
}

/// Eigenpairs of `A` closest to `sigma` via Arnoldi on `(A - σI)^{-1}` with
/// explicit restarts.
pub fn shift_invert(
    a: MatRef<'_, c64>,
    sigma: c64,
    count: usize,
    opts: ShiftInvertOptions,
) -> Result<Vec<EigenPair>> {
    let n = a.nrows();
    if count == 0 || count > n {
        return Err(Error::invalid(format!("requested {count} eigenpairs of a {n}x{n} operator")));
    }
    let lu = ShiftedLu::new(a, sigma);
    if lu.min_pivot_ratio < 1e-14 {
        return Err(Error::SingularShift(format!("{sigma}")));
    }
    let m = opts.krylov_dim.max(2 * count + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut start = random_vector(n, &mut rng);
    let mut best: Vec<EigenPair> = Vec::new();
    for _ in 0..=opts.max_restarts {
        let (vs, h, kdim) = arnoldi(|x| lu.solve_vec(x), &start, m);
        let hm = Mat::<c64>::from_fn(kdim, kdim, |i, j| h[i][j]);
        let e = hm
            .eigen()
            .map_err(|e| Error::LinAlg(format!("Hessenberg eigensolve failed: {e:?}")))?;
        let theta = e.S().column_vector();
        let y = e.U();
        let mut order: Vec<usize> = (0..kdim).collect();
        order.sort_by(|&i, &j| cabs(theta[j]).total_cmp(&cabs(theta[i])));
        let mut pairs = Vec::new();
        for &k in order.iter().take(count) {
            if cabs(theta[k]) == 0.0 {
                continue;
            }
            let lambda = sigma + c64::new(1.0, 0.0) / theta[k];
            let mut v = vec![c64::new(0.0, 0.0); n];
            for (i, vi) in vs.iter().enumerate().take(kdim) {
                let c = y[(i, k)];
                for (dst, src) in v.iter_mut().zip(vi) {
                    *dst += c * src;
                }
            }
            let nv = vnorm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            let residual = residual(a, lambda, &v);
            pairs.push(EigenPair { lambda, vector: v, residual });
        }
        let converged = pairs.len() == count
            && pairs.iter().all(|p| p.residual <= opts.tol * p.lambda.norm().max(1.0));
        best = pairs;
        if converged {
            sort_by_real_desc(&mut best);
            return Ok(best);
        }
        if kdim < m {
            // Invariant subspace found; the pairs are as good as they get.
            break;
        }
        // Restart from a combination of the wanted Ritz vectors.
        start = vec![c64::new(0.0, 0.0); n];
        for (w, p) in best.iter().enumerate() {
            let c = c64::new(1.0 / (1.0 + w as f64), 0.0);
            for (dst, src) in start.iter_mut().zip(&p.vector) {
                *dst += c * src;
            }
        }
    }
    let worst = best.iter().map(|p| p.residual).fold(0.0, f64::max);
    if best.len() == count && best.iter().all(|p| p.residual <= 1e-6 * p.lambda.norm().max(1.0)) {
        sort_by_real_desc(&mut best);
        return Ok(best);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_restarts + 1,
        detail: format!("shift-invert Arnoldi residual {worst:.3e}"),
    })
}

/// Arnoldi with two-pass Gram-Schmidt. Returns basis, Hessenberg rows and
/// the realised Krylov dimension.
fn arnoldi<F: Fn(&[c64]) -> Vec<c64>>(op: F, start: &[c64], m: usize) -> (Vec<Vec<c64>>, Vec<Vec<c64>>, usize) {
    let mut vs: Vec<Vec<c64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![c64::new(0.0, 0.0); m]; m + 1];
    let nrm = vnorm(start);
    vs.push(start.iter().map(|x| x / nrm).collect());
    for j in 0..m {
        let mut w = op(&vs[j]);
        let wn0 = vnorm(&w);
        for _pass in 0..2 {
            for (i, vi) in vs.iter().enumerate() {
                let c = dot(vi, &w);
                h[i][j] += c;
                for (dst, src) in w.iter_mut().zip(vi) {
                    *dst -= c * src;
                }
            }
        }
        let wn = vnorm(&w);
        h[j + 1][j] = c64::new(wn, 0.0);
        if wn <= 1e-13 * wn0.max(1e-300) {
            return (vs, h, j + 1);
        }
        vs.push(w.iter().map(|x| x / wn).collect());
    }
    (vs, h, m)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourReport {
    pub center: (f64, f64),
    pub radius: f64,
    pub rank: usize,
    pub nodes: usize,
    pub idempotency_residual: f64,
    pub max_resolvent_norm: f64,
    /// Eigenvalues of the operator compressed to the projected subspace.
    pub enclosed: Vec<(f64, f64)>,
}

/// Spectral projection onto the eigenvalues inside a circle.
#[derive(Debug, Clone)]
pub struct ContourProjection {
    pub report: ContourReport,
    /// Orthonormal basis of the range of the projection.
    pub basis: Vec<Vec<c64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct ContourOptions {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    pub block: usize,
    /// Relative singular-value threshold for the numerical rank.
    pub rank_tol: f64,
    /// Resolvent norms above this abort the computation.
    pub resolvent_limit: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self { initial_nodes: 16, max_nodes: 512, block: 8, rank_tol: 1e-7, resolvent_limit: 1e10 }
    }
}

/// Riesz projection `(2πi)^{-1} ∮ (z - A)^{-1} dz` by the trapezoidal rule on a
/// circle, applied to a random block; nodes double until the rank and the
/// projected block are stable.
pub fn contour_projection(
    a: MatRef<'_, c64>,
    center: c64,
    radius: f64,
    opts: ContourOptions,
) -> Result<ContourProjection> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("contour radius must be positive, got {radius}")));
    }
    let n = a.nrows();
    let p = opts.block.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xc0);
    let y = orthonormal_block(n, p, &mut rng);
    let mut max_res = 0.0f64;
    let mut prev: Option<(usize, Mat<c64>)> = None;
    let mut nodes = opts.initial_nodes.max(4);
    loop {
        let (acc, res) = projected_block(a, center, radius, nodes, y.as_ref(), opts.resolvent_limit)?;
        max_res = max_res.max(res);
        let rank = numerical_rank(acc.as_ref(), opts.rank_tol)?;
        let change = match &prev {
            Some((_, m)) => frob_diff(acc.as_ref(), m.as_ref()) / frob(acc.as_ref()).max(1e-300),
            None => f64::INFINITY,
        };
        let same_rank = prev.as_ref().map(|(r, _)| *r == rank).unwrap_or(false);
        prev = Some((rank, acc));
        if same_rank && (change < 1e-9 || rank == 0) {
            break;
        }
        if nodes * 2 > opts.max_nodes {
            return Err(Error::NonConvergence {
                iterations: nodes,
                detail: format!("contour rule not stable (rank {rank}, change {change:.2e})"),
            });
        }
        nodes *= 2;
    }
    let (rank, acc) = prev.unwrap();
    let basis = orthonormal_range(acc.as_ref(), rank);
    // Idempotency and compressed operator on the projected subspace.
    let (idem, enclosed) = if rank > 0 {
        let q = Mat::<c64>::from_fn(n, rank, |i, j| basis[j][i]);
        let (pq, _) = projected_block(a, center, radius, nodes, q.as_ref(), f64::INFINITY)?;
        let idem = frob_diff(pq.as_ref(), q.as_ref()) / frob(q.as_ref());
        let aq = a * q.as_ref();
        let small = q.adjoint() * aq;
        let ev = small
            .eigenvalues()
            .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
        (idem, ev.iter().map(|z| (z.re, z.im)).collect())
    } else {
        (0.0, Vec::new())
    };
    Ok(ContourProjection {
        report: ContourReport {
            center: (center.re, center.im),
            radius,
            rank,
            nodes,
            idempotency_residual: idem,
            max_resolvent_norm: max_res,
            enclosed,
        },
        basis,
    })
}

/// Trapezoidal rule with `nodes` points at angles `2π(k + 1/2)/nodes`
/// applied to the block `y`; also returns the largest observed
/// `‖(z - A)^{-1} Y‖ / ‖Y‖`.
fn projected_block(
    a: MatRef<'_, c64>,
    center: c64,
    radius: f64,
    nodes: usize,
    y: MatRef<'_, c64>,
    limit: f64,
) -> Result<(Mat<c64>, f64)> {
    let (n, p) = (y.nrows(), y.ncols());
    let mut acc = Mat::<c64>::zeros(n, p);
    let mut max_res = 0.0f64;
    let yn = frob(y);
    for k in 0..nodes {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / nodes as f64;
        let e = c64::from_polar(radius, th);
        let lu = ShiftedLu::new(a, center + e);
        if lu.min_pivot_ratio < 1e-15 {
            return Err(Error::ContourTooClose(f64::INFINITY));
        }
        // (z - A)^{-1} Y = -(A - z)^{-1} Y
        let x = lu.solve_mat(y);
        let xn = frob(x.as_ref()) / yn;
        max_res = max_res.max(xn);
        if !(xn <= limit) {
            return Err(Error::ContourTooClose(xn));
        }
        for j in 0..p {
            for i in 0..n {
                acc[(i, j)] -= e * x[(i, j)] / nodes as f64;
            }
        }
    }
    Ok((acc, max_res))
}

fn orthonormal_block(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
    let cols: Vec<Vec<c64>> = (0..p).map(|_| random_vector(n, rng)).collect();
    let q = gram_schmidt(cols);
    Mat::from_fn(n, q.len(), |i, j| q[j][i])
}

fn gram_schmidt(cols: Vec<Vec<c64>>) -> Vec<Vec<c64>> {
    let mut q: Vec<Vec<c64>> = Vec::new();
    for mut v in cols {
        let n0 = vnorm(&v);
        for _ in 0..2 {
            for u in &q {
                let c = dot(u, &v);
                for (dst, src) in v.iter_mut().zip(u) {
                    *dst -= c * src;
                }
            }
        }
        let nv = vnorm(&v);
        if nv > 1e-10 * n0.max(1e-300) {
            q.push(v.iter().map(|x| x / nv).collect());
        }
    }
    q
}

fn frob(m: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

fn frob_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += (a[(i, j)] - b[(i, j)]).norm_sqr();
        }
    }
    s.sqrt()
}

fn numerical_rank(m: MatRef<'_, c64>, tol: f64) -> Result<usize> {
    let sv = m
        .singular_values()
        .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    // Y has orthonormal columns, so singular values are measured against 1.
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

fn orthonormal_range(m: MatRef<'_, c64>, rank: usize) -> Vec<Vec<c64>> {
    if rank == 0 {
        return Vec::new();
    }
    let svd = m.thin_svd().expect("thin svd of projected block");
    let u = svd.U();
    (0..rank).map(|j| col_of(u, j)).collect()
}

/// `W^{1/2} A W^{-1/2}` for a diagonal weight `w`.
pub fn weighted_similarity(a: MatRef<'_, c64>, w: &[f64]) -> Mat<c64> {
    let sq: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (sq[i] / sq[j]))
}

/// Largest singular value via Lanczos on `B^H B` with full
/// reorthogonalisation.
pub fn top_singular_value(b: MatRef<'_, c64>) -> f64 {
    let n = b.ncols();
    if n == 0 {
        return 0.0;
    }
    let bh = b.adjoint().to_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x51);
    let k = 80.min(n);
    let mut q: Vec<Vec<c64>> = Vec::new();
    let mut v = random_vector(n, &mut rng);
    let nv = vnorm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = 0.0;
    for it in 0..k {
        q.push(v.clone());
        let bv = matvec(b, &v);
        let mut w = matvec(bh.as_ref(), &bv);
        let a = dot(&v, &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for u in &q {
                let c = dot(u, &w);
                for (dst, src) in w.iter_mut().zip(u) {
                    *dst -= c * src;
                }
            }
        }
        let bn = vnorm(&w);
        // Largest eigenvalue of the tridiagonal matrix so far.
        let m = alpha.len();
        let t = Mat::<f64>::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let ev = t.self_adjoint_eigenvalues(faer::Side::Lower).expect("tridiagonal eigenvalues");
        let top = ev.iter().cloned().fold(0.0, f64::max);
        if it > 3 && (top - last).abs() <= 1e-13 * top {
            last = top;
            break;
        }
        last = top;
        if bn <= 1e-14 * top.max(1e-300) {
            break;
        }
        beta.push(bn);
        v = w.iter().map(|x| x / bn).collect();
    }
    last.max(0.0).sqrt()
}

/// Operator norm of `A` on the weighted space `ℓ²(w)`.
pub fn weighted_norm(a: MatRef<'_, c64>, w: &[f64]) -> f64 {
    top_singular_value(weighted_similarity(a, w).as_ref())
}

/// Adjoint of `A` with respect to `ℓ²(w)`: `W^{-1} A^H W`.
pub fn weighted_adjoint(a: MatRef<'_, c64>, w: &[f64]) -> Mat<c64> {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj() * (w[j] / w[i]))
}

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> Mat<c64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn dense_residuals_small() {
        let a = random_matrix(40, 1);
        let e = dense_eigs(a.as_ref()).unwrap();
        assert_eq!(e.len(), 40);
        assert!(e.iter().all(|p| p.residual < 1e-10));
        assert!(e.windows(2).all(|w| w[0].lambda.re >= w[1].lambda.re));
    }

    #[test]
    fn shift_invert_matches_dense() {
        let a = random_matrix(50, 2);
        let dense = dense_eigs(a.as_ref()).unwrap();
        let top = dense[0].lambda;
        let sigma = top + c64::new(0.05, 0.03);
        let si = shift_invert(a.as_ref(), sigma, 1, ShiftInvertOptions::default()).unwrap();
        assert!((si[0].lambda - top).norm() < 1e-8);
        assert!(si[0].residual < 1e-6);
    }

    #[test]
    fn shift_at_eigenvalue_is_singular() {
        let a = Mat::<c64>::from_fn(6, 6, |i, j| if i == j { c64::new(i as f64, 0.0) } else { c64::new(0.0, 0.0) });
        let r = shift_invert(a.as_ref(), c64::new(2.0, 0.0), 1, ShiftInvertOptions::default());
        assert!(matches!(r, Err(Error::SingularShift(_))));
    }

    #[test]
    fn contour_counts_enclosed_eigenvalues() {
        let d = [0.0, 0.3, 1.0, 2.0, 2.1];
        let a = Mat::<c64>::from_fn(5, 5, |i, j| {
            if i == j {
                c64::new(d[i], 0.0)
            } else if j == i + 1 {
                c64::new(0.2, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let p = contour_projection(a.as_ref(), c64::new(2.05, 0.0), 0.5, ContourOptions::default()).unwrap();
        assert_eq!(p.report.rank, 2);
        assert!(p.report.idempotency_residual < 1e-8);
        let p0 = contour_projection(a.as_ref(), c64::new(5.0, 0.0), 0.5, ContourOptions::default()).unwrap();
        assert_eq!(p0.report.rank, 0);
    }

    #[test]
    fn contour_through_eigenvalue_is_rejected() {
        let a = Mat::<c64>::from_fn(3, 3, |i, j| if i == j { c64::new(i as f64, 0.0) } else { c64::new(0.0, 0.0) });
        // The circle of radius 1 about 0 passes through 1 only between nodes,
        // so use a radius landing on a node angle.
        let r = contour_projection(
            a.as_ref(),
            c64::new(1.0, 0.0) - c64::from_polar(1.0, std::f64::consts::PI / 16.0),
            1.0,
            ContourOptions::default(),
        );
        assert!(matches!(r, Err(Error::ContourTooClose(_))));
    }

    #[test]
    fn top_singular_value_matches_svd() {
        let a = random_matrix(30, 3);
        let sv = a.singular_values().unwrap();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        assert!((top_singular_value(a.as_ref()) - top).abs() < 1e-10 * top);
    }
}
