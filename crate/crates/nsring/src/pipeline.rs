//! Stage orchestration. Each stage writes `<stage>.cert.json` with its checks
//! and a summary that later stages read back, plus CSV tables. Stages run in
//! a fixed order; a stage run on its own loads the certificates of earlier
//! stages from the output directory when they match the config hash and
//! recomputes them otherwise.

use crate::axisym::{self, build_ring_operator, loglog_slope, nearest_eigenpair, EllRow, StreamRow};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::euler2d::{self, mode_operator, ContinuationRow, Weight};
use crate::io::{plotdata, PlotKind, ResultSet, Stamp, Table};
use crate::manifold::{
    consistency, fixed_point, refined_decay, FixedPointReport, LinearMode, ManifoldContext, ManifoldParams,
    WeightedTrajectory,
};
use crate::numerics::{linalg, FieldGrid, Mapping, MeridionalGrid, PolarGrid, RadialGrid};
use crate::physical::{
    assemble_pair, compute_force, distinctness, energy_report, force_integral, lp_bound_sweep, similarity_profile,
    stationary_residual, verify_residual, verify_ubar, Member, Provenance, UbarGrid, LP_EXPONENTS,
};
use crate::profiles::{truncate, RadialVortex, TruncatedProfile, VortexProfile};
use crate::selfsim::{
    beta_continuation, build_selfsim, cfl_rate, energy_inequality_defect, fit_growth, free_heat_check,
    integrability, laplace_resolvent, propagate, resolvent_apply, resolvent_bound_checks, rightmost,
    BetaRow, Propagator, SelfSimParts, SelfSimSetup, Trajectory,
};
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Conjugate-mode spectra agree to this relative tolerance.
pub const CONJUGATE_TOL: f64 = 1e-8;
pub const SKEW_TOL: f64 = 1e-8;
/// Fitted `‖S_ℓ‖` exponent bound `−1/3 + 0.05`.
pub const S_SLOPE_MAX: f64 = -1.0 / 3.0 + 0.05;
/// Fitted `‖(x+ℓ)⁻¹ψ_ℓ‖` exponent bound `−1/6 + 0.05`.
pub const STREAM_SLOPE_MAX: f64 = -1.0 / 6.0 + 0.05;
pub const IDENTITY_TOL: f64 = 1e-8;
pub const RESOLVENT_SLACK: f64 = 1e-6;
pub const LAPLACE_TOL: f64 = 1e-4;
pub const HEAT_TOL: f64 = 1e-4;
pub const EIGEN_PROPAGATION_TOL: f64 = 1e-4;
pub const RATIO_MAX: f64 = 0.5;
pub const REFINED_SLACK: f64 = 0.1;
/// `ū` velocity residual at the discretisation floor of the fine disc.
pub const UBAR_RESIDUAL_TOL: f64 = 1e-8;
pub const ENERGY_GAP_TOL: f64 = 1e-3;
pub const ENERGY_SHRINK_MIN: f64 = 2.0;
pub const SELF_SIMILAR_TOL: f64 = 1e-6;
pub const DISTINCTNESS_TOL: f64 = 0.05;
pub const DIVERGENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Search2d,
    Truncate,
    AxisymSweep,
    BetaSweep,
    Semigroup,
    Manifold,
    Verify,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Search2d,
        Stage::Truncate,
        Stage::AxisymSweep,
        Stage::BetaSweep,
        Stage::Semigroup,
        Stage::Manifold,
        Stage::Verify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Search2d => "search2d",
            Stage::Truncate => "truncate",
            Stage::AxisymSweep => "axisym-sweep",
            Stage::BetaSweep => "beta-sweep",
            Stage::Semigroup => "semigroup",
            Stage::Manifold => "manifold",
            Stage::Verify => "verify",
        }
    }

    fn cert_file(&self) -> String {
        format!("{}.cert.json", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stage(Stage),
    FullPipeline,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full-pipeline" {
            return Ok(Command::FullPipeline);
        }
        Stage::ALL
            .iter()
            .find(|st| st.name() == s)
            .map(|st| Command::Stage(*st))
            .ok_or_else(|| Error::invalid(format!("unknown stage '{s}'")))
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stage(s) => s.name(),
            Command::FullPipeline => "full-pipeline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="` or `"=="`.
    pub relation: String,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: "<=".into(), bound, passed: value <= bound }
    }

    pub fn ge(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: ">=".into(), bound, passed: value >= bound }
    }

    /// Boolean check stored as `1 == 1`.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, relation: "==".into(), bound: 1.0, passed: ok }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub stage: Stage,
    pub stamp: Stamp,
    pub passed: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub summary: Value,
    pub details: Value,
}

impl Certificate {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: Stage,
    /// `passed`, `failed`, `error` or `loaded`.
    pub status: String,
    pub message: Option<String>,
}

/// Machine-readable report of one invocation, written to `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub stamp: Stamp,
    pub command: String,
    pub stages: Vec<StageStatus>,
    pub exit_code: i32,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

/// Map `f` over `items` on up to `workers` threads; results keep the input
/// order whatever the scheduling.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot poisoned").expect("every item mapped"))
        .collect()
}

fn try_par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    par_map(items, workers, f).into_iter().collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSummary {
    pub m: usize,
    pub n: i64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub residual: f64,
    pub modes_scanned: Vec<i64>,
}

impl SearchSummary {
    pub fn lambda(&self) -> c64 {
        c64::new(self.lambda_re, self.lambda_im)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncateSummary {
    pub r_bar: f64,
    pub radii: Vec<f64>,
    pub distances: Vec<f64>,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisymSummary {
    /// Ring radius used downstream.
    pub ell: f64,
    pub lambda_inf_re: f64,
    pub lambda_inf_im: f64,
    pub a: f64,
    pub s_norm: f64,
    pub s_slope: f64,
    pub stream_slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaSummary {
    pub ell: f64,
    pub mu: f64,
    /// Rightmost eigenvalue of `T_∞` at the chosen ring radius.
    pub lambda_inf_re: f64,
    pub lambda_inf_im: f64,
    pub beta0: f64,
    /// Rightmost eigenvalue of `L_vor` at `beta0`.
    pub lvor_re: f64,
    pub lvor_im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemigroupSummary {
    pub a_t_beta: f64,
    pub a_l_vor: f64,
    pub t_beta_exponents: Vec<f64>,
    pub l_vor_exponents: Vec<f64>,
    pub heat_error: f64,
    pub eigen_propagation_error: f64,
    pub smoothing: Vec<f64>,
    pub short_time_smoothing: Vec<f64>,
    pub energy_defect: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldSummary {
    pub a: f64,
    pub b: f64,
    pub t_end: f64,
    pub tau0: f64,
    pub steps: usize,
    pub uper_x_norm: f64,
    pub refined_exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifySummary {
    pub ubar_residual: f64,
    pub ubar_energy_gap: f64,
    pub ubar_energy_shrink: f64,
    pub u_energy_gap: f64,
    pub distinctness_exponent: f64,
    pub expected_exponent: f64,
    pub attainment_constant: f64,
    pub force_integral: f64,
}

/// Trajectories of the fixed point, kept in memory for the verify stage.
pub struct ManifoldState {
    pub setup: SelfSimSetup,
    pub l_vor: Mat<f64>,
    pub mode: LinearMode,
    pub uper: WeightedTrajectory,
    pub ulin: WeightedTrajectory,
    pub report: FixedPointReport,
}

/// What one stage produced.
struct StageOutput {
    checks: Vec<Check>,
    summary: Value,
    details: Value,
    tables: Vec<(String, Table)>,
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub stamp: Stamp,
    pub workers: usize,
    certs: Vec<Certificate>,
    manifold: Option<ManifoldState>,
    statuses: Vec<StageStatus>,
}

enum StageError {
    Failed(Box<Certificate>),
    Error(Error),
}

impl Pipeline {
    /// `out` and `workers` override the config's `[run]` section.
    pub fn new(cfg: RunConfig, out: Option<PathBuf>, workers: Option<usize>) -> Result<Self> {
        cfg.validate()?;
        // Dense kernels run sequentially; floating point results then do not
        // depend on the thread count.
        faer::set_global_parallelism(faer::Par::Seq);
        let out = out.unwrap_or_else(|| PathBuf::from(&cfg.run.out));
        let workers = workers.unwrap_or(cfg.run.workers).max(1);
        std::fs::create_dir_all(&out)?;
        let stamp = Stamp::new(cfg.hash());
        Ok(Self { cfg, out, stamp, workers, certs: Vec::new(), manifold: None, statuses: Vec::new() })
    }

    /// Run `command`, write `report.json` and return the report. Errors are
    /// only returned for I/O failures; stage failures are in the report.
    pub fn run(&mut self, command: Command) -> Result<RunReport> {
        self.write_config()?;
        let targets: Vec<Stage> = match command {
            Command::FullPipeline => Stage::ALL.to_vec(),
            Command::Stage(s) => vec![s],
        };
        let mut exit_code = EXIT_OK;
        for stage in targets {
            let forced = true;
            match self.ensure(stage, forced) {
                Ok(_) => {}
                Err(StageError::Failed(_)) => {
                    exit_code = EXIT_STAGE;
                    break;
                }
                Err(StageError::Error(Error::NonConvergence { .. })) => {
                    exit_code = EXIT_NONCONVERGENCE;
                    break;
                }
                Err(StageError::Error(Error::Io(e))) => return Err(Error::Io(e)),
                Err(StageError::Error(_)) => {
                    exit_code = EXIT_STAGE;
                    break;
                }
            }
        }
        let report = RunReport {
            stamp: self.stamp.clone(),
            command: command.name().into(),
            stages: self.statuses.clone(),
            exit_code,
        };
        self.write_json("report.json", &report)?;
        Ok(report)
    }

    pub fn certificate(&self, stage: Stage) -> Option<&Certificate> {
        self.certs.iter().find(|c| c.stage == stage)
    }

    pub fn manifold_state(&self) -> Option<&ManifoldState> {
        self.manifold.as_ref()
    }

    fn write_config(&self) -> Result<()> {
        let text = format!("# {}\n# config {}\n{}", self.stamp.version, self.stamp.config_hash, self.cfg.to_text());
        std::fs::write(self.out.join("config.toml"), text)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v).expect("report types serialise");
        text.push('\n');
        std::fs::write(self.out.join(name), text)?;
        Ok(())
    }

    /// A passing certificate for `stage`: from memory, from disk when it
    /// matches this config (unless `forced`), or by running the stage.
    fn ensure(&mut self, stage: Stage, forced: bool) -> std::result::Result<Certificate, StageError> {
        if let Some(c) = self.certificate(stage) {
            return if c.passed { Ok(c.clone()) } else { Err(StageError::Failed(Box::new(c.clone()))) };
        }
        if !forced {
            if let Some(c) = self.load_cert(stage) {
                self.statuses.push(StageStatus { stage, status: "loaded".into(), message: None });
                self.certs.push(c.clone());
                return Ok(c);
            }
        }
        let result = self.execute(stage);
        let cert = match result {
            Ok(out) => {
                for (name, table) in &out.tables {
                    table.write(&self.out.join(name), &self.stamp).map_err(StageError::Error)?;
                }
                let passed = out.checks.iter().all(|c| c.passed);
                Certificate {
                    stage,
                    stamp: self.stamp.clone(),
                    passed,
                    error: None,
                    checks: out.checks,
                    summary: out.summary,
                    details: out.details,
                }
            }
            Err(e) => {
                if let Error::Io(_) = e {
                    return Err(StageError::Error(e));
                }
                let cert = Certificate {
                    stage,
                    stamp: self.stamp.clone(),
                    passed: false,
                    error: Some(e.to_string()),
                    checks: Vec::new(),
                    summary: Value::Null,
                    details: Value::Null,
                };
                self.write_json(&stage.cert_file(), &cert).map_err(StageError::Error)?;
                self.statuses.push(StageStatus { stage, status: "error".into(), message: Some(e.to_string()) });
                self.certs.push(cert);
                return Err(StageError::Error(e));
            }
        };
        self.write_json(&stage.cert_file(), &cert).map_err(StageError::Error)?;
        let message = (!cert.passed).then(|| {
            let names: Vec<&str> = cert.failed_checks().iter().map(|c| c.name.as_str()).collect();
            format!("failed checks: {}", names.join(", "))
        });
        let status = if cert.passed { "passed" } else { "failed" };
        self.statuses.push(StageStatus { stage, status: status.into(), message });
        self.certs.push(cert.clone());
        if cert.passed {
            Ok(cert)
        } else {
            Err(StageError::Failed(Box::new(cert)))
        }
    }

    fn load_cert(&self, stage: Stage) -> Option<Certificate> {
        let text = std::fs::read_to_string(self.out.join(stage.cert_file())).ok()?;
        let c: Certificate = serde_json::from_str(&text).ok()?;
        (c.passed && c.stamp == self.stamp).then_some(c)
    }

    /// Summary of an earlier stage, loading or recomputing it as needed.
    fn summary<T: DeserializeOwned>(&mut self, stage: Stage) -> Result<T> {
        let cert = match self.ensure(stage, false) {
            Ok(c) => c,
            Err(StageError::Error(e)) => return Err(e),
            Err(StageError::Failed(c)) => {
                return Err(Error::Precondition(format!("stage {} did not pass", c.stage.name())));
            }
        };
        serde_json::from_value(cert.summary)
            .map_err(|e| Error::Precondition(format!("unreadable {} summary: {e}", stage.name())))
    }

    fn execute(&mut self, stage: Stage) -> Result<StageOutput> {
        match stage {
            Stage::Search2d => self.search2d(),
            Stage::Truncate => self.truncate_stage(),
            Stage::AxisymSweep => self.axisym_sweep(),
            Stage::BetaSweep => self.beta_sweep(),
            Stage::Semigroup => self.semigroup(),
            Stage::Manifold => self.manifold_stage(),
            Stage::Verify => self.verify(),
        }
    }

    fn profile(&self) -> Result<VortexProfile> {
        self.cfg.profile()
    }

    fn search_grids(&self) -> Result<(RadialGrid, RadialGrid)> {
        let s = &self.cfg.search;
        Ok((
            RadialGrid::new(s.n_rho, s.rho_max, Mapping::Geometric)?,
            RadialGrid::new(s.refined_n_rho, s.rho_max, Mapping::Geometric)?,
        ))
    }

    /// Polar base grid of the ring stages and the shipped truncated vortex.
    fn ring_seed(&self) -> Result<(PolarGrid, TruncatedProfile)> {
        let a = &self.cfg.axisym;
        let base = PolarGrid::new(a.n_rho, a.modes, a.disc_radius, None)?;
        let t = truncate(&self.profile()?, self.cfg.profile.r_bar, &base.radial)?;
        Ok((base, t))
    }

    fn search2d(&mut self) -> Result<StageOutput> {
        let p = self.profile()?;
        let (grid, refined) = self.search_grids()?;
        let s = &self.cfg.search;
        let m = p.m as i64;
        let modes: Vec<i64> = (1..).map(|k| k * m).take_while(|n| *n <= s.n_max).collect();
        let threshold = s.threshold;
        let tol = s.confirm_tol;
        let hits = try_par_map(&modes, self.workers, |&n| {
            let top = euler2d::mode_spectrum(&mode_operator(&p, &grid, n, Weight::Plain))?;
            let confirmed = euler2d::rightmost_confirmed(&p, &grid, &refined, n, threshold, tol)?;
            Ok((top.into_iter().next(), confirmed))
        })?;
        let mut sweep = Table::new(&["m", "n", "R", "re", "im", "residual"]);
        for (n, (top, _)) in modes.iter().zip(&hits) {
            if let Some(t) = top {
                sweep.push(vec![p.m as f64, *n as f64, f64::INFINITY, t.lambda.re, t.lambda.im, t.residual]);
            }
        }
        let best = modes
            .iter()
            .zip(&hits)
            .filter_map(|(n, (_, c))| c.as_ref().map(|c| (*n, c)))
            .fold(None::<(i64, &linalg::EigenPair)>, |acc, (n, c)| match acc {
                Some((_, b)) if b.lambda.re >= c.lambda.re => acc,
                _ => Some((n, c)),
            });
        let Some((n, pair)) = best else {
            return Err(Error::NotUnstable(format!(
                "no unstable eigenvalue above {threshold} in modes {modes:?}"
            )));
        };
        let op = mode_operator(&p, &grid, n, Weight::Plain);
        let spectrum = linalg::dense_eigenvalues(op.total.as_ref())?;
        let a0 = mode_operator(&p, &grid, 0, Weight::Plain);
        let mirror = linalg::dense_eigenvalues(mode_operator(&p, &grid, -n, Weight::Plain).total.as_ref())?;
        let scale = spectrum.iter().map(|l| l.norm()).fold(1.0, f64::max);
        let conjugate_gap = spectrum
            .iter()
            .map(|l| mirror.iter().map(|m| (l.conj() - m).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
            / scale;
        let summary = SearchSummary {
            m: p.m,
            n,
            lambda_re: pair.lambda.re,
            lambda_im: pair.lambda.im,
            residual: pair.residual,
            modes_scanned: modes.clone(),
        };
        let checks = vec![
            Check::ge("unstable_re_lambda", pair.lambda.re, threshold),
            Check::le("zero_mode_norm", a0.norm(), 0.0),
            Check::le("conjugate_mode_gap", conjugate_gap, CONJUGATE_TOL),
        ];
        let cloud = plotdata(&ResultSet::Spectrum(&spectrum), PlotKind::SpectrumCloud)?;
        Ok(StageOutput {
            checks,
            summary: to_value(&summary),
            details: Value::Null,
            tables: vec![("search2d_sweep.csv".into(), sweep), ("spectrum_cloud.dat".into(), cloud)],
        })
    }

    fn truncate_stage(&mut self) -> Result<StageOutput> {
        let seed: SearchSummary = self.summary(Stage::Search2d)?;
        let p = self.profile()?;
        let (grid, _) = self.search_grids()?;
        let s = &self.cfg.search;
        let r_bar = self.cfg.profile.r_bar;
        let mut radii = s.truncation_radii.clone();
        if !radii.iter().any(|r| (r - r_bar).abs() < 1e-12) {
            radii.push(r_bar);
        }
        radii.sort_by(f64::total_cmp);
        let cr = s.contour_radius;
        let rows: Vec<ContinuationRow> = try_par_map(&radii, self.workers, |&r| {
            let mut v = euler2d::truncation_continuation(&p, &grid, seed.n, seed.lambda(), &[r], cr)?;
            Ok(v.remove(0))
        })?;
        let swept: Vec<&ContinuationRow> =
            rows.iter().filter(|r| s.truncation_radii.iter().any(|x| (x - r.r_cut).abs() < 1e-12)).collect();
        let dist: Vec<f64> = swept.iter().map(|r| r.distance).collect();
        let min_rank = rows.iter().map(|r| r.riesz_rank).min().unwrap_or(0);
        let checks = vec![
            Check::holds("distance_decreasing", strictly_decreasing(&dist)),
            Check::ge("min_riesz_rank", min_rank as f64, 1.0),
        ];
        let mut t = Table::new(&["R", "re", "im", "distance", "residual", "riesz_rank"]);
        for r in &rows {
            t.push(vec![r.r_cut, r.re, r.im, r.distance, r.residual, r.riesz_rank as f64]);
        }
        let summary = TruncateSummary {
            r_bar,
            radii: rows.iter().map(|r| r.r_cut).collect(),
            distances: rows.iter().map(|r| r.distance).collect(),
            ranks: rows.iter().map(|r| r.riesz_rank).collect(),
        };
        Ok(StageOutput {
            checks,
            summary: to_value(&summary),
            details: to_value(&rows),
            tables: vec![("truncate.csv".into(), t)],
        })
    }

    fn axisym_sweep(&mut self) -> Result<StageOutput> {
        let seed: SearchSummary = self.summary(Stage::Search2d)?;
        let (base, t) = self.ring_seed()?;
        let a = &self.cfg.axisym;
        let r_bar = self.cfg.profile.r_bar;
        let planar = build_ring_operator(&t, &base, None)?;
        let inf = nearest_eigenpair(&planar.op, seed.lambda())?;
        let lambda_inf = inf.lambda;
        drop(planar);
        let ells: Vec<f64> = a.ell_factors.iter().map(|f| f * r_bar).collect();
        let mut all: Vec<Option<f64>> = vec![None];
        all.extend(ells.iter().map(|l| Some(*l)));
        let cr = a.contour_radius;
        let rows: Vec<EllRow> = try_par_map(&all, self.workers, |&ell| {
            Ok(axisym::ell_continuation(&t, &base, &[ell], lambda_inf, cr)?.remove(0))
        })?;
        let zeta = |x: f64, z: f64| t.zeta(x.hypot(z));
        let stream: Vec<StreamRow> = axisym::stream_convergence_study(&base, zeta, r_bar, &ells)?;
        let finite: Vec<&EllRow> = rows.iter().filter(|r| r.ell.is_some()).collect();
        let s_norms: Vec<f64> = finite.iter().map(|r| r.s_norm).collect();
        let s_slope = loglog_slope(&ells, &s_norms);
        let stream_slope = loglog_slope(&ells, &stream.iter().map(|r| r.scaled_stream).collect::<Vec<_>>());
        let dist: Vec<f64> = finite.iter().map(|r| r.distance).collect();
        let min_rank = rows.iter().map(|r| r.riesz_rank).min().unwrap_or(0);
        let m_skew = rows.iter().map(|r| r.m_skew).fold(0.0, f64::max);
        let gap_2d = (lambda_inf - seed.lambda()).norm();
        let chosen = finite.iter().find(|r| r.re > a.margin * r.s_norm);
        let Some(chosen) = chosen else {
            return Err(Error::NotUnstable(format!(
                "no ring radius in {ells:?} with Re lambda > {} ||S||",
                a.margin
            )));
        };
        let checks = vec![
            Check::le("planar_vs_2d_eigenvalue", gap_2d, a.contour_radius),
            Check::le("s_norm_slope", s_slope, S_SLOPE_MAX),
            Check::holds("distance_decreasing", strictly_decreasing(&dist)),
            Check::ge("min_riesz_rank", min_rank as f64, 1.0),
            Check::le("m_skew_defect", m_skew, SKEW_TOL),
            Check::le("stream_slope", stream_slope, STREAM_SLOPE_MAX),
        ];
        let mut table = Table::new(&["ell", "re", "im", "distance", "s_norm", "riesz_rank"]);
        for r in &rows {
            let ell = r.ell.unwrap_or(f64::INFINITY);
            table.push(vec![ell, r.re, r.im, r.distance, r.s_norm, r.riesz_rank as f64]);
        }
        let mut st = Table::new(&["ell", "grad_gap", "scaled_stream"]);
        stream.iter().for_each(|r| st.push(vec![r.ell, r.grad_gap, r.scaled_stream]));
        let summary = AxisymSummary {
            ell: chosen.ell.expect("finite row"),
            lambda_inf_re: lambda_inf.re,
            lambda_inf_im: lambda_inf.im,
            a: chosen.re,
            s_norm: chosen.s_norm,
            s_slope,
            stream_slope,
        };
        Ok(StageOutput {
            checks,
            summary: to_value(&summary),
            details: serde_json::json!({ "ell": rows, "stream": stream }),
            tables: vec![("axisym_sweep.csv".into(), table), ("stream_convergence.csv".into(), st)],
        })
    }

    fn selfsim_setup(&mut self) -> Result<(SelfSimSetup, TruncatedProfile, f64)> {
        let ax: AxisymSummary = self.summary(Stage::AxisymSweep)?;
        let (base, t) = self.ring_seed()?;
        Ok((build_selfsim(&t, &base, ax.ell)?, t, ax.ell))
    }

    fn beta_sweep(&mut self) -> Result<StageOutput> {
        let (ss, _, ell) = self.selfsim_setup()?;
        let b = self.cfg.similarity.clone();
        let parts = &ss.parts;
        let inf = rightmost(&parts.t_beta(None)?)?;
        let rows: Vec<BetaRow> = beta_continuation(parts, &b.betas, inf.lambda, ss.mu)?;
        let probes = [c64::new(ss.mu + 0.5, 0.0), c64::new(ss.mu + 1.0, 0.5)];
        let resolvent = try_par_map(&b.betas, self.workers, |&beta| resolvent_bound_checks(parts, beta, ss.mu, &probes))?;
        let worst_resolvent = resolvent
            .iter()
            .flatten()
            .map(|c| c.norm / c.bound)
            .fold(0.0, f64::max);
        let laplace = laplace_check(&ss, b.beta0, ss.mu + 0.5, b.laplace_dt, b.laplace_s_end)?;
        let identity_gap = rows.iter().map(|r| r.identity_gap).fold(0.0, f64::max);
        let matrix_gap = b.betas.iter().map(|&beta| parts.identity_gap(beta)).collect::<Result<Vec<_>>>()?;
        let dist: Vec<f64> = rows.iter().map(|r| r.distance).collect();
        let lvor = rightmost(&parts.l_vor(b.beta0)?)?;
        let checks = vec![
            Check::ge("a_minus_mu", inf.lambda.re - ss.mu, 0.0),
            Check::le("eigenvalue_identity_gap", identity_gap, IDENTITY_TOL),
            Check::le("matrix_identity_gap", matrix_gap.iter().copied().fold(0.0, f64::max), 1e-12),
            Check::holds("distance_decreasing", strictly_decreasing(&dist)),
            Check::le("resolvent_over_bound", worst_resolvent, 1.0 + RESOLVENT_SLACK),
            Check::le("laplace_vs_direct", laplace, LAPLACE_TOL),
            Check::le("drift_skew_defect", parts.drift_skew_defect(), SKEW_TOL),
        ];
        let mut t = Table::new(&["beta", "re", "im", "tilde_re", "tilde_im", "identity_gap"]);
        rows.iter().for_each(|r| t.push(vec![r.beta, r.re, r.im, r.tilde_re, r.tilde_im, r.identity_gap]));
        let curve = plotdata(&ResultSet::BetaSweep(&rows), PlotKind::SweepCurve)?;
        let summary = BetaSummary {
            ell,
            mu: ss.mu,
            lambda_inf_re: inf.lambda.re,
            lambda_inf_im: inf.lambda.im,
            beta0: b.beta0,
            lvor_re: lvor.lambda.re,
            lvor_im: lvor.lambda.im,
        };
        Ok(StageOutput {
            checks,
            summary: to_value(&summary),
            details: serde_json::json!({ "rows": rows, "resolvent": resolvent, "laplace_error": laplace }),
            tables: vec![("beta_sweep.csv".into(), t), ("beta_curve.dat".into(), curve)],
        })
    }

    fn semigroup(&mut self) -> Result<StageOutput> {
        let _: BetaSummary = self.summary(Stage::BetaSweep)?;
        let (ss, _, _) = self.selfsim_setup()?;
        let b = self.cfg.similarity.clone();
        let grid = &ss.grid;

        let heat_grid = MeridionalGrid::new(b.heat_n, b.heat_half_width, Some(b.heat_half_width))?;
        let heat = free_heat_check(&heat_grid, b.heat_c, b.heat_tau, b.heat_dt, 8)?;
        let heat_error = heat.iter().map(|h| h.rel_error).fold(0.0, f64::max);
        let free_skew = SelfSimParts::free(&heat_grid)?.drift_skew_defect();

        let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
        let nodes = grid.nodes();
        let smooth: Vec<Vec<f64>> = (0..b.probes)
            .map(|_| {
                let full: Vec<f64> = nodes
                    .iter()
                    .map(|(x, z)| rng.random_range(-1.0..1.0) * (-(x * x + z * z) / 4.0).exp())
                    .collect();
                grid.restrict(&full)
            })
            .collect();
        let rough: Vec<Vec<f64>> = (0..b.rough_probes)
            .map(|_| grid.restrict(&nodes.iter().map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
            .collect();

        let tb = ss.parts.t_beta(Some(b.growth_beta))?;
        let a_tb = rightmost(&tb)?;
        let prop_tb = Propagator::guarded(tb.clone(), b.growth_dt, cfl_rate(grid, &ss.background, 1.0), b.cfl_max)?;
        let lv = ss.parts.l_vor(b.beta0)?;
        let a_lv = rightmost(&lv)?;
        let prop_lv =
            Propagator::guarded(lv.clone(), b.lvor_dt, cfl_rate(grid, &ss.background, b.beta0), b.cfl_max)?;
        let tb_steps = (b.growth_tau / b.growth_dt).round() as usize;
        let lv_steps = (b.lvor_tau / b.lvor_dt).round() as usize;
        let fits = try_par_map(&smooth, self.workers, |u0| {
            let t1 = propagate(grid, &prop_tb, u0, 0.0, tb_steps, 10)?;
            let f1 = fit_growth(&t1.tau, &t1.l2(), (0.5 * b.growth_tau, b.growth_tau))?;
            let t2 = propagate(grid, &prop_lv, u0, 0.0, lv_steps, 10)?;
            let f2 = fit_growth(&t2.tau, &t2.l2(), (0.5 * b.lvor_tau, b.lvor_tau))?;
            Ok((f1.exponent, f2.exponent, t2))
        })?;
        let tb_exp: Vec<f64> = fits.iter().map(|f| f.0).collect();
        let lv_exp: Vec<f64> = fits.iter().map(|f| f.1).collect();
        let ladder: &Trajectory = &fits[0].2;
        let worst = |v: &[f64], a: f64| v.iter().map(|e| (e - a).abs()).fold(0.0, f64::max);

        let eig_err = eigen_propagation_error(&tb, &a_tb, &ss.parts.weights, b.dt, 1.0)?;

        let prop_s = Propagator::guarded(lv.clone(), b.dt, cfl_rate(grid, &ss.background, b.beta0), b.cfl_max)?;
        let s_steps = (b.smoothing_tau / b.dt).round() as usize;
        let a = a_lv.lambda.re;
        let smoothing = try_par_map(&rough, self.workers, |u0| {
            let tr = propagate(grid, &prop_s, u0, 0.0, s_steps, 1)?;
            let n0 = tr.norms[0][0];
            let mut sup = 0.0f64;
            let mut short = 0.0f64;
            for (tau, n) in tr.tau.iter().zip(&tr.norms).skip(1) {
                let r = tau.sqrt() * n[1] / n0;
                sup = sup.max(r * (-a * tau).exp());
                if *tau <= 0.02 {
                    short = short.max(r);
                }
            }
            Ok((sup, short))
        })?;
        let sup_smoothing = smoothing.iter().map(|s| s.0).fold(0.0, f64::max);

        let energy_defect = {
            let op = &ss.parts.d * (1.0 / b.beta0) + &ss.parts.m + &ss.parts.s;
            let prop = Propagator::new(op, b.dt)?;
            let states = prop.march::<fn(usize) -> Vec<f64>>(&gaussian_probe(grid), (1.0 / b.dt).round() as usize, None)?;
            energy_inequality_defect(&ss.parts, b.beta0, ss.mu, &states, b.dt)
        };
        let eta: Vec<f64> = a_lv.vector.iter().map(|z| z.re).collect();
        let (l1, vel_l2) = integrability(grid, &ss.biot_savart, &eta);

        let checks = vec![
            Check::le("heat_oracle_error", heat_error, HEAT_TOL),
            Check::le("free_drift_skew_defect", free_skew, SKEW_TOL),
            Check::le("t_beta_growth_gap", worst(&tb_exp, a_tb.lambda.re), b.growth_tol),
            Check::le("l_vor_growth_gap", worst(&lv_exp, a), b.growth_tol),
            Check::le("eigenfunction_propagation_error", eig_err, EIGEN_PROPAGATION_TOL),
            Check::le("smoothing_constant", sup_smoothing, b.smoothing_bound),
            Check::le("energy_inequality_defect", energy_defect, 0.0),
            Check::holds("eigenfunction_integrable", l1.is_finite() && vel_l2.is_finite()),
        ];
        let mut heat_t = Table::new(&["tau", "numeric", "exact", "rel_error"]);
        heat.iter().for_each(|h| heat_t.push(vec![h.tau, h.numeric, h.exact, h.rel_error]));
        let mut norms = Table::new(&["tau", "l2", "h1", "h2"]);
        for (tau, n) in ladder.tau.iter().zip(&ladder.norms) {
            norms.push(vec![*tau, n[0], n[1], n[2]]);
        }
        let ladder_plot = plotdata(&ResultSet::Trajectory(ladder), PlotKind::NormLadder)?;
        let summary = SemigroupSummary {
            a_t_beta: a_tb.lambda.re,
            a_l_vor: a,
            t_beta_exponents: tb_exp,
            l_vor_exponents: lv_exp,
            heat_error,
            eigen_propagation_error: eig_err,
            smoothing: smoothing.iter().map(|s| s.0).collect(),
            short_time_smoothing: smoothing.iter().map(|s| s.1).collect(),
            energy_defect,
        };
        Ok(StageOutput {
            checks,
            summary: to_value(&summary),
            details: serde_json::json!({ "heat": heat, "eigenfunction_l1": l1, "eigenfunction_velocity_l2": vel_l2 }),
            tables: vec![
                ("heat_oracle.csv".into(), heat_t),
                ("trajectory_norms.csv".into(), norms),
                ("norm_ladder.dat".into(), ladder_plot),
            ],
        })
    }

    fn run_manifold(&mut self) -> Result<()> {
        if self.manifold.is_some() {
            return Ok(());
        }
        let (ss, _, _) = self.selfsim_setup()?;
        let b = &self.cfg.similarity;
        let m = &self.cfg.manifold;
        let rate = cfl_rate(&ss.grid, &ss.background, b.beta0);
        if m.dt * rate > b.cfl_max {
            return Err(Error::Cfl(format!("dt * rate = {:.3} exceeds {}", m.dt * rate, b.cfl_max)));
        }
        let l_vor = ss.parts.l_vor(b.beta0)?;
        let pair = rightmost(&l_vor)?;
        let mode = LinearMode::new(pair.lambda, &pair.vector, &ss.parts.weights, pair.residual)?;
        let a = mode.a();
        let params = ManifoldParams {
            t_end: m.t_end,
            span: m.span_factor / a,
            sobolev_index: m.sobolev_index,
            eps0: m.eps0_factor * a,
            delta: m.delta_factor * a,
            max_iter: m.max_iter,
            tol: m.tol,
            max_retries: m.max_retries,
        };
        let (uper, ulin, report) = fixed_point(&ss.grid, &ss.biot_savart, &l_vor, &mode, m.dt, &params)?;
        self.manifold = Some(ManifoldState { setup: ss, l_vor, mode, uper, ulin, report });
        Ok(())
    }

    fn manifold_stage(&mut self) -> Result<StageOutput> {
        let _: BetaSummary = self.summary(Stage::BetaSweep)?;
        self.run_manifold()?;
        let st = self.manifold.as_ref().expect("manifold computed");
        let a = st.mode.a();
        let dt = self.cfg.manifold.dt;
        let prop = Propagator::new(st.l_vor.clone(), dt)?;
        let ctx = ManifoldContext { grid: &st.setup.grid, bs: &st.setup.biot_savart, prop: &prop, mode: &st.mode };
        let n = st.uper.states.len();
        let rows = consistency(&ctx, &st.ulin, &st.uper, &[n / 4, n / 2, 3 * n / 4]);
        let decay = refined_decay(&st.uper, &st.ulin, &st.mode)?;
        let r = &st.report;
        let max_ratio = r.ratios.iter().copied().fold(0.0, f64::max);
        let consistency_ratio = rows.iter().map(|c| c.residual / c.order_scale.max(1e-300)).fold(0.0, f64::max);
        let checks = vec![
            Check::holds("converged", r.converged),
            Check::le("max_difference_ratio", max_ratio, RATIO_MAX),
            Check::le("surrogate_sum", r.surrogate_sum, 1.0),
            Check::le("uper_weighted_norm", st.uper.x_norm(), 1.0),
            Check::ge("refined_decay_exponent", decay.fit.exponent, 2.0 * a - REFINED_SLACK),
            Check::ge("consistency_snapshots", rows.len() as f64, 3.0),
            Check::le("consistency_over_order_scale", consistency_ratio, 1.0),
        ];
        let mut it = Table::new(&["iteration", "x_norm", "difference", "ratio"]);
        for (k, d) in r.differences.iter().enumerate() {
            let ratio = if k == 0 { f64::NAN } else { r.ratios[k - 1] };
            it.push(vec![(k + 1) as f64, r.x_norms[k + 1], *d, ratio]);
        }
        let mut norms = Table::new(&["tau", "ulin", "uper"]);
        let stride = (n / 200).max(1);
        for i in (0..n).filter(|i| i % stride == 0 || *i == n - 1) {
            norms.push(vec![st.uper.tau(i), st.ulin.norms[i], st.uper.norms[i]]);
        }
        let summary = ManifoldSummary {
            a,
            b: st.mode.lambda.im,
            t_end: r.t_end,
            tau0: r.tau0,
            steps: n - 1,
            uper_x_norm: st.uper.x_norm(),
            refined_exponent: decay.fit.exponent,
        };
        Ok(StageOutput {
            checks,
            summary: to_value(&summary),
            details: serde_json::json!({ "fixed_point": r, "refined_decay": decay, "consistency": rows }),
            tables: vec![("fixed_point.csv".into(), it), ("manifold_norms.csv".into(), norms)],
        })
    }

    fn verify(&mut self) -> Result<StageOutput> {
        let _: ManifoldSummary = self.summary(Stage::Manifold)?;
        self.run_manifold()?;
        let (_, t) = self.ring_seed()?;
        let beta = self.cfg.similarity.beta0;
        let ph = self.cfg.physical.clone();
        let disc = self.cfg.axisym.disc_radius;
        let hash = self.stamp.config_hash.clone();
        let seed_desc = format!("{} {} m={}", self.profile()?.family_name(), self.profile()?.params_string(), self.cfg.profile.m);
        let st = self.manifold.as_ref().expect("manifold computed");
        let grid = &st.setup.grid;
        let ell = grid.ell().ok_or_else(|| Error::invalid("similarity grid has no ring radius"))?;
        let tau0 = st.uper.tau0;
        let t_end = st.uper.tau(st.uper.states.len() - 1);

        let ubar = verify_ubar(&t, beta, ell, UbarGrid { n_rho: ph.n_rho, modes: ph.modes, rho_max: disc, d_tau: ph.d_tau }, tau0, t_end)?;

        let profile = similarity_profile(&t, grid, beta)?;
        let force = compute_force(grid, &profile);
        let prov = Provenance { seed: seed_desc, ell, beta, report_id: hash };
        let pair = assemble_pair(grid, &st.setup.biot_savart, profile, force, &st.ulin, &st.uper, prov)?;
        let n = pair.tau.len();
        let coarse_ubar = stationary_residual(grid, &pair.profile, &pair.force);
        let residual = verify_residual(&pair, &st.setup.biot_savart, &st.l_vor, &[n / 4, n / 2, 3 * n / 4], coarse_ubar);
        let residual_ratio = residual
            .u
            .iter()
            .map(|r| r.perturbation / r.order_bound.max(1e-300))
            .fold(0.0, f64::max);
        let (_, u_energy) = energy_report(&pair);
        let divergence = [0, n / 2, n - 1]
            .iter()
            .map(|&j| pair.divergence(Member::U, j).max(pair.divergence(Member::Ubar, j)))
            .fold(0.0, f64::max);
        let samples: Vec<usize> =
            (0..ph.lp_samples).map(|i| i * (n - 1) / (ph.lp_samples - 1)).collect();
        let lp = lp_bound_sweep(&pair, &samples, &LP_EXPONENTS, &[0, 1]);
        let exact_variation = lp
            .iter()
            .filter(|c| c.field != "u")
            .map(|c| c.variation)
            .fold(0.0, f64::max);
        let u_spread = lp.iter().filter(|c| c.field == "u").map(|c| c.spread).fold(0.0, f64::max);
        let dist = distinctness(&pair, &st.ulin, &st.mode, 0)?;
        let fi = force_integral(grid, &pair.force, t_end);

        let checks = vec![
            Check::le("ubar_velocity_residual", ubar.residual.velocity, UBAR_RESIDUAL_TOL),
            Check::ge("ubar_wrong_force_residual", ubar.residual.wrong_force, 100.0 * ubar.residual.velocity),
            Check::le("ubar_divergence", ubar.divergence, 1e-8),
            Check::le("force_outside_support", ubar.force_outside, 1e-12),
            Check::le("force_scaling", ubar.force_scaling, SELF_SIMILAR_TOL),
            Check::le("ubar_energy_gap", ubar.energy_gap, ENERGY_GAP_TOL),
            Check::ge("ubar_energy_shrink", ubar.energy_shrink, ENERGY_SHRINK_MIN),
            Check::le("u_residual_over_order_bound", residual_ratio, 1.0),
            Check::le("u_energy_gap", u_energy.relative_gap, ENERGY_GAP_TOL),
            Check::le("flux_divergence", divergence, DIVERGENCE_TOL),
            Check::le("self_similar_column_variation", exact_variation, SELF_SIMILAR_TOL),
            Check::holds("u_columns_bounded", u_spread.is_finite()),
            Check::ge("min_difference", dist.min_difference, f64::MIN_POSITIVE),
            Check::le("distinctness_exponent_gap", (dist.fit.exponent - dist.expected).abs(), DISTINCTNESS_TOL),
            Check::holds("attainment_finite", dist.attainment_u.is_finite()),
            Check::le(
                "force_integral_quadrature_gap",
                (fi.quadrature - fi.closed_form).abs() / fi.closed_form.max(1e-300),
                1e-8,
            ),
        ];

        let mut res_t = Table::new(&["t", "perturbation", "order_bound", "total"]);
        residual.u.iter().for_each(|r| res_t.push(vec![r.t, r.perturbation, r.order_bound, r.total]));
        let mut en_t = Table::new(&["t", "energy", "dissipation", "work", "gap"]);
        for i in 0..u_energy.t.len() {
            en_t.push(vec![u_energy.t[i], u_energy.energy[i], u_energy.dissipation[i], u_energy.work[i], u_energy.gap[i]]);
        }
        let mut lp_t = Table::new(&["field", "p", "k", "min", "max", "spread", "variation"]);
        for c in &lp {
            let field = match c.field.as_str() {
                "ubar" => 0.0,
                "u" => 1.0,
                _ => 2.0,
            };
            let lo = c.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lp_t.push(vec![field, c.p, c.k as f64, lo, hi, c.spread, c.variation]);
        }
        let mut d_t = Table::new(&["t", "difference_l2", "u_l2", "ubar_l2"]);
        for j in (0..n).step_by((n / 100).max(1)) {
            d_t.push(vec![pair.t(j), pair.difference_l2(j), pair.l2_at(Member::U, j), pair.l2_at(Member::Ubar, j)]);
        }
        let summary = VerifySummary {
            ubar_residual: ubar.residual.velocity,
            ubar_energy_gap: ubar.energy_gap,
            ubar_energy_shrink: ubar.energy_shrink,
            u_energy_gap: u_energy.relative_gap,
            distinctness_exponent: dist.fit.exponent,
            expected_exponent: dist.expected,
            attainment_constant: dist.attainment_u,
            force_integral: fi.quadrature,
        };
        Ok(StageOutput {
            checks,
            summary: to_value(&summary),
            details: serde_json::json!({
                "provenance": pair.provenance,
                "ubar": ubar,
                "residual": residual,
                "distinctness": dist,
                "force_integral": fi,
                "lp_field_codes": { "ubar": 0, "u": 1, "force": 2 },
            }),
            tables: vec![
                ("residual.csv".into(), res_t),
                ("energy.csv".into(), en_t),
                ("lp_columns.csv".into(), lp_t),
                ("distinctness.csv".into(), d_t),
            ],
        })
    }
}

/// `x e^{−|ξ|²}` at the unknowns: a probe resolved on every grid in use.
pub fn gaussian_probe(grid: &PolarGrid) -> Vec<f64> {
    grid.restrict(&grid.sample(|x, z| x * (-(x * x + z * z)).exp()))
}

/// Relative difference between the direct resolvent of `β⁻¹D + M + S` and
/// its Laplace-transform evaluation on a Gaussian probe, at real `λ`.
pub fn laplace_check(ss: &SelfSimSetup, beta: f64, lambda: f64, dt: f64, s_end: f64) -> Result<f64> {
    let a = &ss.parts.d * (1.0 / beta) + &ss.parts.m + &ss.parts.s;
    let g = gaussian_probe(&ss.grid);
    let gc: Vec<c64> = g.iter().map(|v| c64::new(*v, 0.0)).collect();
    let direct = resolvent_apply(&a, c64::new(lambda, 0.0), &gc)?;
    let lap = laplace_resolvent(&a, lambda, &g, dt, s_end)?;
    let w = &ss.parts.weights;
    let num: f64 = direct.iter().zip(&lap).zip(w).map(|((d, l), w)| w * (d.re - l).powi(2)).sum();
    let den: f64 = direct.iter().zip(w).map(|(d, w)| w * d.re * d.re).sum();
    Ok((num / den.max(1e-300)).sqrt())
}

/// `‖U(τ) − Re(e^{λτ} η)‖ / ‖Re(e^{λτ} η)‖` after propagating `Re η`.
pub fn eigen_propagation_error(a: &Mat<f64>, pair: &linalg::EigenPair, w: &[f64], dt: f64, tau: f64) -> Result<f64> {
    let prop = Propagator::new(a.clone(), dt)?;
    let u0: Vec<f64> = pair.vector.iter().map(|z| z.re).collect();
    let steps = (tau / dt).round() as usize;
    let states = prop.march::<fn(usize) -> Vec<f64>>(&u0, steps, None)?;
    let e = (pair.lambda * (dt * steps as f64)).exp();
    let exact: Vec<f64> = pair.vector.iter().map(|z| (e * z).re).collect();
    let num: f64 = states[steps].iter().zip(&exact).zip(w).map(|((u, x), w)| w * (u - x).powi(2)).sum();
    let den: f64 = exact.iter().zip(w).map(|(x, w)| w * x * x).sum();
    Ok((num / den.max(1e-300)).sqrt())
}

/// Parse and validate a config file; `None` gives the shipped config.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => {
            let c = RunConfig::default();
            c.validate()?;
            Ok(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<usize> = (0..37).collect();
        for workers in [1, 2, 5, 64] {
            let out = par_map(&items, workers, |i| i * i);
            assert_eq!(out, items.iter().map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn command_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Command>().unwrap(), Command::Stage(s));
        }
        assert_eq!("full-pipeline".parse::<Command>().unwrap(), Command::FullPipeline);
        assert!("everything".parse::<Command>().is_err());
    }

    #[test]
    fn checks_compare_with_bounds() {
        assert!(Check::le("x", 1.0, 1.0).passed);
        assert!(!Check::le("x", 1.0 + 1e-12, 1.0).passed);
        assert!(Check::ge("x", 2.0, 1.0).passed);
        assert!(!Check::le("x", f64::NAN, 1.0).passed);
        assert!(!Check::holds("x", false).passed);
    }
}
