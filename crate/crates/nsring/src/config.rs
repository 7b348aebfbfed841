//! Run configuration: flat `key = value` text with sections (TOML), its
//! validation and the hash that every artifact carries.

use crate::error::{Error, Result};
use crate::profiles::{Family, VortexProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSection,
    pub search: SearchSection,
    pub axisym: AxisymSection,
    pub similarity: SimilaritySection,
    pub manifold: ManifoldSection,
    pub physical: PhysicalSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSection {
    #[serde(flatten)]
    pub family: Family,
    /// Symmetry index.
    pub m: usize,
    /// Truncation radius of the shipped vortex.
    pub r_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub n_rho: usize,
    pub rho_max: f64,
    /// Radial nodes of the confirmation grid.
    pub refined_n_rho: usize,
    /// Largest angular mode scanned.
    pub n_max: i64,
    /// Minimum growth rate counted as unstable.
    pub threshold: f64,
    /// Relative distance within which the refined grid must reproduce an
    /// eigenvalue.
    pub confirm_tol: f64,
    pub truncation_radii: Vec<f64>,
    pub contour_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisymSection {
    pub n_rho: usize,
    pub modes: usize,
    pub disc_radius: f64,
    /// Ring radii of the sweep in units of `r_bar`.
    pub ell_factors: Vec<f64>,
    pub contour_radius: f64,
    /// Required ratio `Re λ_ℓ / ‖S_ℓ‖` when picking the ring radius.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySection {
    pub betas: Vec<f64>,
    /// Amplitude of the self-similar profile for the semigroup, manifold and
    /// physical stages.
    pub beta0: f64,
    /// Large amplitude at which `T_β` growth is compared with `T_∞`.
    pub growth_beta: f64,
    pub dt: f64,
    /// Step of the long `T_β` growth run.
    pub growth_dt: f64,
    pub growth_tau: f64,
    /// Step and horizon of the `L_vor` growth run.
    pub lvor_dt: f64,
    pub lvor_tau: f64,
    pub cfl_max: f64,
    /// Step and horizon of the Laplace-transform resolvent cross-check.
    pub laplace_dt: f64,
    pub laplace_s_end: f64,
    pub probes: usize,
    pub rough_probes: usize,
    /// Horizon and bound of `sup τ^{1/2}‖U(τ)‖_{H¹} e^{−aτ} / ‖U₀‖` over
    /// the rough probes.
    pub smoothing_tau: f64,
    pub smoothing_bound: f64,
    pub seed: u64,
    /// Tolerance on fitted growth exponents.
    pub growth_tol: f64,
    /// Free-mode heat oracle: box size and decay constant.
    pub heat_n: usize,
    pub heat_half_width: f64,
    pub heat_c: f64,
    pub heat_tau: f64,
    pub heat_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    pub t_end: f64,
    /// `τ₀ = T − span_factor / a`.
    pub span_factor: f64,
    pub sobolev_index: usize,
    /// `ε₀ = eps0_factor · a`, `δ = delta_factor · a`.
    pub eps0_factor: f64,
    pub delta_factor: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    /// Disc of the closed-form `ū` checks.
    pub n_rho: usize,
    pub modes: usize,
    pub d_tau: f64,
    /// Time samples of the `L^p` sweep.
    pub lp_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out: String,
    pub workers: usize,
}

impl Default for RunConfig {
    /// The shipped configuration.
    fn default() -> Self {
        Self {
            profile: ProfileSection {
                family: Family::TailP2 { amp: 2.5, tail: 0.05, shield: 4.0, width: 1.0 },
                m: 2,
                r_bar: 4.0,
            },
            search: SearchSection {
                n_rho: 96,
                rho_max: 48.0,
                refined_n_rho: 128,
                n_max: 8,
                threshold: 1e-3,
                confirm_tol: 1e-2,
                truncation_radii: vec![8.0, 16.0, 32.0],
                contour_radius: 0.05,
            },
            axisym: AxisymSection {
                n_rho: 64,
                modes: 6,
                disc_radius: 5.0,
                ell_factors: vec![8.0, 16.0, 32.0, 64.0],
                contour_radius: 0.05,
                margin: 2.0,
            },
            similarity: SimilaritySection {
                betas: vec![10.0, 100.0, 1000.0, 10000.0],
                beta0: 100.0,
                growth_beta: 10000.0,
                dt: 1e-3,
                growth_dt: 0.02,
                growth_tau: 40.0,
                lvor_dt: 5e-4,
                lvor_tau: 3.0,
                cfl_max: 50.0,
                laplace_dt: 5e-3,
                laplace_s_end: 40.0,
                probes: 10,
                rough_probes: 5,
                smoothing_tau: 2.0,
                smoothing_bound: 10.0,
                seed: 20_240_611,
                growth_tol: 0.05,
                heat_n: 30,
                heat_half_width: 8.0,
                heat_c: 0.25,
                heat_tau: 2.0,
                heat_dt: 0.01,
            },
            manifold: ManifoldSection {
                t_end: 1.5,
                span_factor: 10.0,
                sobolev_index: 3,
                eps0_factor: 0.5,
                delta_factor: 0.25,
                dt: 1e-3,
                tol: 1e-10,
                max_iter: 40,
                max_retries: 6,
            },
            physical: PhysicalSection { n_rho: 320, modes: 16, d_tau: 0.05, lp_samples: 10 },
            run: RunSection { out: "out".into(), workers: 1 },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn non_empty(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    v.iter().try_for_each(|x| positive(name, *x))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn profile(&self) -> Result<VortexProfile> {
        VortexProfile::new(self.profile.family.clone(), self.profile.m)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile().map_err(|e| Error::Config(e.to_string()))?;
        positive("profile.r_bar", self.profile.r_bar)?;
        let s = &self.search;
        non_empty("search.truncation_radii", &s.truncation_radii)?;
        positive("search.rho_max", s.rho_max)?;
        positive("search.threshold", s.threshold)?;
        positive("search.confirm_tol", s.confirm_tol)?;
        positive("search.contour_radius", s.contour_radius)?;
        if s.n_rho < 8 || s.refined_n_rho <= s.n_rho || s.n_max < 1 {
            return Err(Error::Config("search grid needs n_rho ≥ 8, a finer refined grid and n_max ≥ 1".into()));
        }
        let a = &self.axisym;
        non_empty("axisym.ell_factors", &a.ell_factors)?;
        positive("axisym.disc_radius", a.disc_radius)?;
        positive("axisym.contour_radius", a.contour_radius)?;
        positive("axisym.margin", a.margin)?;
        if a.disc_radius < self.profile.r_bar {
            return Err(Error::Config("axisym.disc_radius must contain r_bar".into()));
        }
        if a.ell_factors.iter().any(|f| *f < 2.0) {
            return Err(Error::Config("ring radii must be at least 2 r_bar".into()));
        }
        let b = &self.similarity;
        non_empty("similarity.betas", &b.betas)?;
        for (name, v) in [
            ("beta0", b.beta0),
            ("growth_beta", b.growth_beta),
            ("dt", b.dt),
            ("growth_dt", b.growth_dt),
            ("growth_tau", b.growth_tau),
            ("lvor_dt", b.lvor_dt),
            ("lvor_tau", b.lvor_tau),
            ("cfl_max", b.cfl_max),
            ("laplace_dt", b.laplace_dt),
            ("laplace_s_end", b.laplace_s_end),
            ("smoothing_tau", b.smoothing_tau),
            ("smoothing_bound", b.smoothing_bound),
            ("growth_tol", b.growth_tol),
            ("heat_half_width", b.heat_half_width),
            ("heat_c", b.heat_c),
            ("heat_tau", b.heat_tau),
            ("heat_dt", b.heat_dt),
        ] {
            positive(&format!("similarity.{name}"), v)?;
        }
        if b.probes == 0 || b.rough_probes == 0 {
            return Err(Error::Config("similarity probe counts must be positive".into()));
        }
        let m = &self.manifold;
        for (name, v) in [
            ("span_factor", m.span_factor),
            ("eps0_factor", m.eps0_factor),
            ("delta_factor", m.delta_factor),
            ("dt", m.dt),
            ("tol", m.tol),
        ] {
            positive(&format!("manifold.{name}"), v)?;
        }
        if !m.t_end.is_finite() || m.sobolev_index < 3 || m.max_iter == 0 {
            return Err(Error::Config("manifold needs finite t_end, sobolev_index ≥ 3 and max_iter ≥ 1".into()));
        }
        let p = &self.physical;
        positive("physical.d_tau", p.d_tau)?;
        if p.n_rho < 16 || p.modes < 2 || p.lp_samples < 2 {
            return Err(Error::Config("physical grid needs n_rho ≥ 16, modes ≥ 2, lp_samples ≥ 2".into()));
        }
        if self.run.workers == 0 {
            return Err(Error::Config("run.workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let text = c.to_text();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn rejects_empty_sweep_and_unknown_keys() {
        let mut c = RunConfig::default();
        c.similarity.betas.clear();
        assert!(matches!(RunConfig::parse(&c.to_text()), Err(Error::Config(_))));
        let text = RunConfig::default().to_text().replace("[run]", "[run]\nbogus = 1");
        assert!(matches!(RunConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.similarity.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    proptest::proptest! {
        #[test]
        fn edited_configs_round_trip(
            amp in 0.1f64..10.0,
            betas in proptest::collection::vec(1.0f64..1e5, 1..6),
            workers in 1usize..16,
            seed in 0u64..(i64::MAX as u64),
        ) {
            let mut c = RunConfig::default();
            c.profile.family = Family::TailP2 { amp, tail: 0.05, shield: 4.0, width: 1.0 };
            c.similarity.betas = betas;
            c.similarity.seed = seed;
            c.run.workers = workers;
            let back = RunConfig::parse(&c.to_text()).unwrap();
            proptest::prop_assert_eq!(back.hash(), c.hash());
            proptest::prop_assert_eq!(back, c);
        }
    }
}
