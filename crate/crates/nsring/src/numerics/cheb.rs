//! Chebyshev-type node families, barycentric differentiation and
//! interpolatory quadrature on `[-1, 1]`.

use faer::prelude::*;
use faer::Mat;

/// Chebyshev-Gauss-Lobatto points in ascending order (both endpoints included).
pub fn lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = (n - 1) as f64;
    (0..n)
        .map(|j| -(std::f64::consts::PI * j as f64 / m).cos())
        .collect()
}

/// Chebyshev-Gauss-Radau points with the endpoint `+1` included and `-1`
/// excluded, ascending.
pub fn radau_right(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let denom = (2 * n - 1) as f64;
    let mut s: Vec<f64> = (0..n)
        .map(|j| (2.0 * std::f64::consts::PI * j as f64 / denom).cos())
        .collect();
    s.reverse();
    s
}

/// Barycentric weights as (log magnitude, sign) pairs so large node counts
/// cannot overflow.
fn log_bary_weights(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|j| {
            let mut lg = 0.0;
            let mut sign = 1.0;
            for k in 0..n {
                if k != j {
                    let d = x[j] - x[k];
                    lg -= d.abs().ln();
                    if d < 0.0 {
                        sign = -sign;
                    }
                }
            }
            (lg, sign)
        })
        .collect()
}

/// Barycentric weights normalised to unit maximum magnitude.
pub fn bary_weights(x: &[f64]) -> Vec<f64> {
    let lw = log_bary_weights(x);
    let mx = lw.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    lw.iter().map(|(l, s)| s * (l - mx).exp()).collect()
}

/// First-derivative matrix of the polynomial interpolant through `x`.
pub fn diff_matrix(x: &[f64]) -> Mat<f64> {
    let n = x.len();
    let w = bary_weights(x);
    let mut d = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Chebyshev polynomial `T_k(s)`.
pub fn cheb_t(k: usize, s: f64) -> f64 {
    if s.abs() <= 1.0 {
        (k as f64 * s.acos()).cos()
    } else {
        let mut t0 = 1.0;
        let mut t1 = s;
        if k == 0 {
            return 1.0;
        }
        for _ in 1..k {
            let t2 = 2.0 * s * t1 - t0;
            t0 = t1;
            t1 = t2;
        }
        t1
    }
}

/// Interpolatory quadrature weights for `∫_{-1}^{1}` that integrate every
/// polynomial of degree `< n` exactly.
pub fn interval_weights(s: &[f64]) -> Vec<f64> {
    let n = s.len();
    let v = Mat::<f64>::from_fn(n, n, |k, j| cheb_t(k, s[j]));
    let m = Mat::<f64>::from_fn(n, 1, |k, _| {
        if k % 2 == 1 {
            0.0
        } else {
            2.0 / (1.0 - (k * k) as f64)
        }
    });
    let w = v.partial_piv_lu().solve(&m);
    (0..n).map(|j| w[(j, 0)]).collect()
}

/// Barycentric interpolation of nodal values at an arbitrary point.
pub fn interpolate(x: &[f64], w: &[f64], f: &[f64], t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..x.len() {
        let d = t - x[j];
        if d == 0.0 {
            return f[j];
        }
        let c = w[j] / d;
        num += c * f[j];
        den += c;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_polynomial_is_exact() {
        let x = lobatto(12);
        let d = diff_matrix(&x);
        for i in 0..x.len() {
            let mut acc = 0.0;
            for j in 0..x.len() {
                acc += d[(i, j)] * x[j].powi(5);
            }
            assert!((acc - 5.0 * x[i].powi(4)).abs() < 1e-11);
        }
    }

    #[test]
    fn weights_integrate_polynomials() {
        for s in [lobatto(9), radau_right(9)] {
            let w = interval_weights(&s);
            let q: f64 = s.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
            assert!((q - 2.0 / 7.0).abs() < 1e-13);
        }
    }

    #[test]
    fn radau_nodes_exclude_left_end() {
        let s = radau_right(7);
        assert_eq!(*s.last().unwrap(), 1.0);
        assert!(s[0] > -1.0);
        assert!(s.windows(2).all(|p| p[0] < p[1]));
    }
}
