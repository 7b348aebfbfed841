//! Radial vortex profiles, their angular velocity and smooth truncation.

use crate::error::{Error, Result};
use crate::numerics::quad;
use crate::numerics::RadialGrid;
use serde::{Deserialize, Serialize};

/// Radially symmetric vorticity `ω̄(ϱ)` together with the angular velocity
/// `ζ(ϱ) = ϱ^{-2} ∫_0^ϱ s ω̄(s) ds` of its velocity `ū = ζ(ϱ) x^⊥`.
pub trait RadialVortex {
    fn omega(&self, rho: f64) -> f64;
    fn omega_prime(&self, rho: f64) -> f64;
    fn zeta(&self, rho: f64) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Shielded core plus algebraic tail,
    /// `amp [(1 − (α/2) x^α) e^{−x^α} + tail ⟨ϱ⟩^{-2}]` with `x = ϱ/width`
    /// and `α = shield` an even integer. The core carries no net circulation.
    TailP2 { amp: f64, tail: f64, shield: f64, width: f64 },
    /// `amp G(ϱ)`.
    Annulus { amp: f64, center: f64, width: f64 },
    /// Piecewise-linear table of `(ϱ, ω̄)` knots, zero beyond the last knot.
    CustomTable { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexProfile {
    pub family: Family,
    /// Rotational symmetry index of the perturbations considered.
    pub m: usize,
}

fn gauss_ring(rho: f64, c: f64, w: f64) -> f64 {
    (-((rho - c) / w).powi(2)).exp() + (-((rho + c) / w).powi(2)).exp()
}

fn gauss_ring_prime(rho: f64, c: f64, w: f64) -> f64 {
    let a = (rho - c) / w;
    let b = (rho + c) / w;
    -2.0 / w * (a * (-a * a).exp() + b * (-b * b).exp())
}

/// `∫_0^1 t g(ϱ t) dt` by composite Gauss-Legendre with panels fine enough
/// for features of size `scale`.
fn mean_moment<F: Fn(f64) -> f64>(g: F, rho: f64, scale: f64) -> f64 {
    if rho == 0.0 {
        return 0.5 * g(0.0);
    }
    let panels = 2 + (4.0 * rho / scale).ceil() as usize;
    quad::composite(|t| t * g(rho * t), 0.0, 1.0, panels, 12)
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("profile parameter {name} is not finite")))
    }
}

impl VortexProfile {
    /// Validated constructor.
    pub fn new(family: Family, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid(format!("symmetry index m must be at least 2, got {m}")));
        }
        match &family {
            Family::TailP2 { amp, tail, shield, width } => {
                for (n, v) in [("amp", amp), ("tail", tail), ("shield", shield), ("width", width)] {
                    check_finite(n, *v)?;
                }
                if *width <= 0.0 {
                    return Err(Error::invalid("core width must be positive"));
                }
                // Odd or fractional exponents make ω̄ non-smooth at the origin.
                if *shield < 2.0 || shield.fract() != 0.0 || (*shield as i64) % 2 != 0 {
                    return Err(Error::invalid(format!("shield exponent must be an even integer >= 2, got {shield}")));
                }
            }
            Family::Annulus { amp, center, width } => {
                for (n, v) in [("amp", amp), ("center", center), ("width", width)] {
                    check_finite(n, *v)?;
                }
                if *width <= 0.0 || *center < 0.0 {
                    return Err(Error::invalid("annulus width must be positive and centre non-negative"));
                }
            }
            Family::CustomTable { knots } => {
                if knots.len() < 2 {
                    return Err(Error::invalid("custom table needs at least two knots"));
                }
                if knots[0].0 != 0.0 {
                    return Err(Error::invalid("custom table must start at rho = 0"));
                }
                if knots.iter().any(|(r, w)| !r.is_finite() || !w.is_finite()) {
                    return Err(Error::invalid("custom table contains non-finite values"));
                }
                if knots.windows(2).any(|p| p[1].0 <= p[0].0) {
                    return Err(Error::invalid("custom table radii must increase strictly"));
                }
            }
        }
        Ok(Self { family, m })
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::TailP2 { .. } => "tail_p2",
            Family::Annulus { .. } => "annulus",
            Family::CustomTable { .. } => "custom_table",
        }
    }

    /// Amplitude factor (1 for tables).
    pub fn amp(&self) -> f64 {
        match self.family {
            Family::TailP2 { amp, .. } | Family::Annulus { amp, .. } => amp,
            Family::CustomTable { .. } => 1.0,
        }
    }

    /// Short `key=value` description for file headers.
    pub fn params_string(&self) -> String {
        match &self.family {
            Family::TailP2 { amp, tail, shield, width } => {
                format!("amp={amp} tail={tail} shield={shield} width={width}")
            }
            Family::Annulus { amp, center, width } => format!("amp={amp} center={center} width={width}"),
            Family::CustomTable { knots } => format!("knots={}", knots.len()),
        }
    }

    /// Same profile with every vorticity value multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let family = match &self.family {
            Family::TailP2 { amp, tail, shield, width } => {
                Family::TailP2 { amp: amp * s, tail: *tail, shield: *shield, width: *width }
            }
            Family::Annulus { amp, center, width } => Family::Annulus { amp: amp * s, center: *center, width: *width },
            Family::CustomTable { knots } => {
                Family::CustomTable { knots: knots.iter().map(|(r, w)| (*r, w * s)).collect() }
            }
        };
        Self { family, m: self.m }
    }

    /// Limit of `⟨ϱ⟩² (|ω̄| + ϱ |ω̄′|)` as `ϱ → ∞`.
    fn certificate_tail_limit(&self) -> f64 {
        match self.family {
            Family::TailP2 { amp, tail, .. } => 3.0 * (amp * tail).abs(),
            _ => 0.0,
        }
    }

    fn feature_scale(&self) -> (f64, f64) {
        match &self.family {
            Family::TailP2 { width, .. } => (4.0 * width.max(1.0), 0.25 * width.min(2.0)),
            Family::Annulus { center, width, .. } => (*center + 8.0 * width, *width),
            Family::CustomTable { knots } => {
                let last = knots.last().unwrap().0;
                let h = knots.windows(2).map(|p| p[1].0 - p[0].0).fold(f64::INFINITY, f64::min);
                (last, h)
            }
        }
    }
}

impl RadialVortex for VortexProfile {
    fn omega(&self, rho: f64) -> f64 {
        match &self.family {
            Family::TailP2 { amp, tail, shield, width } => {
                let x = (rho / width).powf(*shield);
                amp * ((1.0 - 0.5 * shield * x) * (-x).exp() + tail / (1.0 + rho * rho))
            }
            Family::Annulus { amp, center, width } => amp * gauss_ring(rho, *center, *width),
            Family::CustomTable { knots } => table_value(knots, rho),
        }
    }

    fn omega_prime(&self, rho: f64) -> f64 {
        match &self.family {
            Family::TailP2 { amp, tail, shield, width } => {
                let a = *shield;
                let x = rho / width;
                let xa1 = x.powf(a - 1.0);
                let core = -(a / width) * xa1 * (0.5 * a + 1.0 - 0.5 * a * x * xa1) * (-(x * xa1)).exp();
                amp * (core - 2.0 * tail * rho / (1.0 + rho * rho).powi(2))
            }
            Family::Annulus { amp, center, width } => amp * gauss_ring_prime(rho, *center, *width),
            Family::CustomTable { knots } => table_slope(knots, rho),
        }
    }

    fn zeta(&self, rho: f64) -> f64 {
        match &self.family {
            Family::TailP2 { amp, tail, shield, width } => {
                let t = if rho < 1e-4 {
                    0.5 - 0.25 * rho * rho
                } else {
                    (rho * rho).ln_1p() / (2.0 * rho * rho)
                };
                amp * (0.5 * (-(rho / width).powf(*shield)).exp() + tail * t)
            }
            Family::Annulus { amp, center, width } => {
                amp * mean_moment(|s| gauss_ring(s, *center, *width), rho, *width)
            }
            Family::CustomTable { knots } => table_zeta(knots, rho),
        }
    }
}

fn table_segment(knots: &[(f64, f64)], rho: f64) -> Option<usize> {
    if rho > knots.last().unwrap().0 {
        return None;
    }
    let k = knots.partition_point(|(r, _)| *r <= rho);
    Some(k.saturating_sub(1).min(knots.len() - 2))
}

fn table_value(knots: &[(f64, f64)], rho: f64) -> f64 {
    match table_segment(knots, rho) {
        None => 0.0,
        Some(k) => {
            let (r0, w0) = knots[k];
            let (r1, w1) = knots[k + 1];
            w0 + (w1 - w0) * (rho - r0) / (r1 - r0)
        }
    }
}

fn table_slope(knots: &[(f64, f64)], rho: f64) -> f64 {
    match table_segment(knots, rho) {
        None => 0.0,
        Some(k) => (knots[k + 1].1 - knots[k].1) / (knots[k + 1].0 - knots[k].0),
    }
}

/// Exact `ϱ^{-2} ∫_0^ϱ s ω̄(s) ds` for the piecewise-linear table.
fn table_zeta(knots: &[(f64, f64)], rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.5 * knots[0].1;
    }
    // ∫ s (a + b s) ds on [x0, x1].
    let seg = |x0: f64, x1: f64, r0: f64, w0: f64, slope: f64| {
        let a = w0 - slope * r0;
        a * 0.5 * (x1 * x1 - x0 * x0) + slope * (x1.powi(3) - x0.powi(3)) / 3.0
    };
    let mut acc = 0.0;
    for p in knots.windows(2) {
        let (r0, w0) = p[0];
        let (r1, w1) = p[1];
        if r0 >= rho {
            break;
        }
        let hi = r1.min(rho);
        acc += seg(r0, hi, r0, w0, (w1 - w0) / (r1 - r0));
    }
    acc / (rho * rho)
}

/// `sup_ϱ ⟨ϱ⟩² (|ω̄| + ϱ |ω̄′|)`, the decay certificate of the profile class.
pub fn profile_certificate(p: &VortexProfile) -> f64 {
    let q = |r: f64| (1.0 + r * r) * (p.omega(r).abs() + r * p.omega_prime(r).abs());
    let (extent, scale) = p.feature_scale();
    let near = (extent.max(1.0)) * 2.0;
    let n_near = ((near / scale.min(1.0)) * 50.0).ceil() as usize + 1000;
    let mut best = 0.0f64;
    let mut arg = 0.0;
    for k in 0..=n_near {
        let r = near * k as f64 / n_near as f64;
        let v = q(r);
        if v > best {
            best = v;
            arg = r;
        }
    }
    // Geometric sweep of the far field.
    let mut r = near;
    while r < 1e6 {
        let v = q(r);
        if v > best {
            best = v;
            arg = r;
        }
        r *= 1.01;
    }
    // Golden-section polish around the sampled maximiser.
    let h = near / n_near as f64;
    let (mut a, mut b) = ((arg - h).max(0.0), arg + h.max(arg * 0.01));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if q(x1) > q(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.max(q(0.5 * (a + b))).max(p.certificate_tail_limit())
}

/// Smooth step `φ`: 1 on `[0, 1/2]`, 0 on `[1, ∞)`, with derivatives.
pub fn cutoff(x: f64) -> (f64, f64, f64) {
    if x <= 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = 2.0 * x - 1.0;
    let h = |t: f64| (-1.0 / t).exp();
    let hp = |t: f64| (-1.0 / t).exp() / (t * t);
    let hpp = |t: f64| (-1.0 / t).exp() * (1.0 / t.powi(4) - 2.0 / t.powi(3));
    let (a, b) = (h(1.0 - s), h(s));
    let (ap, bp) = (-hp(1.0 - s), hp(s));
    let (app, bpp) = (hpp(1.0 - s), hpp(s));
    let d = a + b;
    let num = ap * b - a * bp;
    let nump = app * b - a * bpp;
    let phi = a / d;
    let dphi = num / (d * d);
    let ddphi = nump / (d * d) - 2.0 * num * (ap + bp) / (d * d * d);
    (phi, 2.0 * dphi, 4.0 * ddphi)
}

/// The vortex with velocity `φ(ϱ/R) ū`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedProfile {
    pub parent: VortexProfile,
    pub r_cut: f64,
}

/// Minimum number of grid nodes required inside the cutoff layer `[R/2, R]`.
pub const CUTOFF_LAYER_NODES: usize = 8;

pub fn truncate(profile: &VortexProfile, r_cut: f64, grid: &RadialGrid) -> Result<TruncatedProfile> {
    if !(r_cut > 0.0 && r_cut.is_finite()) {
        return Err(Error::invalid(format!("truncation radius must be positive, got {r_cut}")));
    }
    let layer = grid.count_in(0.5 * r_cut, r_cut);
    if layer < CUTOFF_LAYER_NODES {
        return Err(Error::UnderResolved {
            what: "cutoff layer",
            detail: format!("{layer} nodes in [{}, {}], need {CUTOFF_LAYER_NODES}", 0.5 * r_cut, r_cut),
        });
    }
    Ok(TruncatedProfile { parent: profile.clone(), r_cut })
}

impl TruncatedProfile {
    fn phi(&self, rho: f64) -> (f64, f64, f64) {
        let (p, dp, ddp) = cutoff(rho / self.r_cut);
        (p, dp / self.r_cut, ddp / (self.r_cut * self.r_cut))
    }

    /// Circulation inside radius `ϱ`, divided by `2π`.
    pub fn circulation(&self, rho: f64) -> f64 {
        rho * rho * self.zeta(rho)
    }
}

impl RadialVortex for TruncatedProfile {
    fn omega(&self, rho: f64) -> f64 {
        let (p, dp, _) = self.phi(rho);
        p * self.parent.omega(rho) + rho * self.parent.zeta(rho) * dp
    }

    fn omega_prime(&self, rho: f64) -> f64 {
        let (p, dp, ddp) = self.phi(rho);
        let w = self.parent.omega(rho);
        let z = self.parent.zeta(rho);
        p * self.parent.omega_prime(rho) + dp * (2.0 * w - z) + rho * z * ddp
    }

    fn zeta(&self, rho: f64) -> f64 {
        self.phi(rho).0 * self.parent.zeta(rho)
    }
}

/// Columnar samples `(ϱ, ω̄, ω̄′, ζ)` on a grid.
pub fn sample_columns<V: RadialVortex>(v: &V, grid: &RadialGrid) -> Vec<[f64; 4]> {
    grid.rho
        .iter()
        .map(|&r| [r, v.omega(r), v.omega_prime(r), v.zeta(r)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_zero() {
        let p = VortexProfile::new(Family::TailP2 { amp: 0.0, tail: 1.0, shield: 4.0, width: 1.0 }, 2).unwrap();
        for r in [0.0, 0.3, 5.0] {
            assert_eq!(p.omega(r), 0.0);
            assert_eq!(p.zeta(r), 0.0);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(VortexProfile::new(Family::Annulus { amp: 1.0, center: 1.0, width: 0.0 }, 2).is_err());
        assert!(VortexProfile::new(Family::Annulus { amp: f64::NAN, center: 1.0, width: 0.2 }, 2).is_err());
        assert!(VortexProfile::new(Family::Annulus { amp: 1.0, center: 1.0, width: 0.2 }, 1).is_err());
        assert!(VortexProfile::new(Family::CustomTable { knots: vec![(0.0, 1.0), (0.0, 2.0)] }, 2).is_err());
    }

    #[test]
    fn step_table_zeta() {
        let p = VortexProfile::new(Family::CustomTable { knots: vec![(0.0, 3.0), (1.0, 3.0)] }, 2).unwrap();
        assert!((p.zeta(1.0) - 1.5).abs() < 1e-14);
        assert!((p.zeta(2.0) - 1.5 / 4.0).abs() < 1e-14);
        assert!((p.zeta(0.0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn cutoff_is_smooth_step() {
        assert_eq!(cutoff(0.2).0, 1.0);
        assert_eq!(cutoff(1.5).0, 0.0);
        let h = 1e-6;
        for x in [0.55, 0.7, 0.9] {
            let (_, d, dd) = cutoff(x);
            let fd = (cutoff(x + h).0 - cutoff(x - h).0) / (2.0 * h);
            let fdd = (cutoff(x + h).1 - cutoff(x - h).1) / (2.0 * h);
            assert!((d - fd).abs() < 1e-6);
            assert!((dd - fdd).abs() < 1e-4 * dd.abs().max(1.0));
        }
    }
}
